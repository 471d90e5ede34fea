use crate::grid::{normalize_angle, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: u32,
    pub pose: Pose2D,
    pub length: f64,
    pub width: f64,
    /// m/s along the heading.
    pub speed: f64,
    /// rad/s.
    pub yaw_rate: f64,
    pub spawn_frame: usize,
    /// Exclusive.
    pub despawn_frame: usize,
}

impl AgentState {
    pub fn alive_at(&self, frame: usize) -> bool {
        self.spawn_frame <= frame && frame < self.despawn_frame
    }

    /// Corners of the footprint in world coordinates, counter-clockwise.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        rect_corners(&self.pose, self.length, self.width)
    }
}

pub(crate) fn rect_corners(pose: &Pose2D, length: f64, width: f64) -> [[f64; 2]; 4] {
    let (hl, hw) = (length / 2.0, width / 2.0);
    [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]].map(|p| pose.to_world(p))
}

/// Advances one step of constant turn rate and velocity motion.
pub fn step_agent(state: &AgentState, dt: f64) -> AgentState {
    let mut next = *state;
    next.pose = ctrv(&state.pose, state.speed, state.yaw_rate, dt);
    next
}

pub(crate) fn ctrv(pose: &Pose2D, speed: f64, yaw_rate: f64, dt: f64) -> Pose2D {
    let yaw = pose.yaw;
    let (x, y) = if yaw_rate.abs() < 1e-9 {
        (
            pose.x + speed * dt * yaw.cos(),
            pose.y + speed * dt * yaw.sin(),
        )
    } else {
        let r = speed / yaw_rate;
        let yaw2 = yaw + yaw_rate * dt;
        (
            pose.x + r * (yaw2.sin() - yaw.sin()),
            pose.y + r * (yaw.cos() - yaw2.cos()),
        )
    };
    Pose2D {
        x,
        y,
        yaw: normalize_angle(yaw + yaw_rate * dt),
    }
}
