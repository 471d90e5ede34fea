use crate::error::{Error, Result};
use crate::grid::Pose2D;

use super::agent::{ctrv, rect_corners, step_agent, AgentState};
use super::rng::{streams, DetRng};

const EGO_LENGTH: f64 = 4.5;
const EGO_WIDTH: f64 = 2.0;
const PLACEMENT_ATTEMPTS: usize = 500;
const SCENARIO_ATTEMPTS: usize = 50;
/// Period of the stop-and-go ego profile: driving for the first 4 s, stopped for 2 s.
const STOP_AND_GO_PERIOD: f64 = 6.0;
const STOP_AND_GO_DRIVE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoProfile {
    Straight,
    ConstantTurn,
    StopAndGo,
}

impl EgoProfile {
    pub fn name(&self) -> &'static str {
        match self {
            EgoProfile::Straight => "straight",
            EgoProfile::ConstantTurn => "turn",
            EgoProfile::StopAndGo => "stop-and-go",
        }
    }
}

impl std::str::FromStr for EgoProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(EgoProfile::Straight),
            "turn" => Ok(EgoProfile::ConstantTurn),
            "stop-and-go" => Ok(EgoProfile::StopAndGo),
            other => Err(Error::InvalidConfig(format!(
                "unknown ego profile {other:?}"
            ))),
        }
    }
}

/// Multi-lane road traffic around the ego vehicle.
///
/// Lanes run parallel to the initial ego heading, `lane_width` apart, with
/// `lanes_per_side` lanes on each side of the ego lane. Lanes on the left carry
/// oncoming traffic, the outermost lane on each side is a parking lane.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_agents: usize,
    pub num_frames: usize,
    pub dt: f64,
    pub ego_profile: EgoProfile,
    pub ego_speed: f64,
    pub ego_yaw_rate: f64,
    /// Speed bounds of moving agents, m/s.
    pub speed_range: (f64, f64),
    /// Bound on |yaw rate| of moving agents, rad/s.
    pub max_yaw_rate: f64,
    pub length_range: (f64, f64),
    pub width_range: (f64, f64),
    pub lanes_per_side: u32,
    pub lane_width: f64,
    /// Agents spawn within this longitudinal distance of the ego.
    pub spawn_half_length: f64,
    /// Half extent of the square perception window used for the coverage check.
    pub window_half_extent: f64,
    /// Minimum gap kept between any two footprints, ego included, in every frame.
    pub clearance: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Suited to the 100 m x 100 m window.
    pub fn long_range(num_agents: usize, num_frames: usize, seed: u64) -> Self {
        Self {
            num_agents,
            num_frames,
            dt: 0.5,
            ego_profile: EgoProfile::Straight,
            ego_speed: 5.0,
            ego_yaw_rate: 0.1,
            speed_range: (2.0, 10.0),
            max_yaw_rate: 0.05,
            length_range: (3.8, 5.0),
            width_range: (1.7, 2.1),
            lanes_per_side: 3,
            lane_width: 3.5,
            spawn_half_length: 40.0,
            window_half_extent: 50.0,
            clearance: 1.0,
            seed,
        }
    }

    /// Suited to the 30 m x 30 m window.
    pub fn short_range(num_agents: usize, num_frames: usize, seed: u64) -> Self {
        Self {
            ego_speed: 2.0,
            speed_range: (0.5, 4.0),
            lanes_per_side: 2,
            spawn_half_length: 25.0,
            window_half_extent: 15.0,
            ..Self::long_range(num_agents, num_frames, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.num_frames == 0 {
            return bad("num_frames must be positive");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        let (s0, s1) = self.speed_range;
        if !(0.0 <= s0 && s0 <= s1) {
            return bad("speed_range must satisfy 0 <= min <= max");
        }
        if !(self.length_range.0 > 0.0 && self.length_range.0 <= self.length_range.1) {
            return bad("length_range must be positive and ordered");
        }
        if !(self.width_range.0 > 0.0 && self.width_range.0 <= self.width_range.1) {
            return bad("width_range must be positive and ordered");
        }
        if !(self.max_yaw_rate >= 0.0 && self.clearance >= 0.0) {
            return bad("max_yaw_rate and clearance must be non-negative");
        }
        if !(self.lane_width > 0.0 && self.spawn_half_length > 0.0 && self.window_half_extent > 0.0)
        {
            return bad("lane_width, spawn_half_length and window_half_extent must be positive");
        }
        if self.ego_speed < 0.0 {
            return bad("ego_speed must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub ego: Pose2D,
    pub agents: Vec<AgentState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dt: f64,
    pub seed: u64,
    pub frames: Vec<Frame>,
}

impl Scenario {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Largest agent speed in the scenario.
    pub fn max_speed(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.agents.iter().map(|a| a.speed))
            .fold(0.0, f64::max)
    }
}

fn ego_trajectory(cfg: &ScenarioConfig) -> Vec<Pose2D> {
    let mut poses = Vec::with_capacity(cfg.num_frames);
    let mut pose = Pose2D::identity();
    for f in 0..cfg.num_frames {
        poses.push(pose);
        let t = f as f64 * cfg.dt;
        let (speed, yaw_rate) = match cfg.ego_profile {
            EgoProfile::Straight => (cfg.ego_speed, 0.0),
            EgoProfile::ConstantTurn => (cfg.ego_speed, cfg.ego_yaw_rate),
            EgoProfile::StopAndGo => {
                let phase = t % STOP_AND_GO_PERIOD;
                (
                    if phase < STOP_AND_GO_DRIVE {
                        cfg.ego_speed
                    } else {
                        0.0
                    },
                    0.0,
                )
            }
        };
        pose = ctrv(&pose, speed, yaw_rate, cfg.dt);
    }
    poses
}

struct Footprint {
    pose: Pose2D,
    length: f64,
    width: f64,
}

/// Separating-axis overlap test for two oriented rectangles.
fn rects_overlap(a: &Footprint, b: &Footprint) -> bool {
    let ca = rect_corners(&a.pose, a.length, a.width);
    let cb = rect_corners(&b.pose, b.length, b.width);
    for yaw in [a.pose.yaw, b.pose.yaw] {
        let (s, c) = yaw.sin_cos();
        for axis in [[c, s], [-s, c]] {
            let proj = |p: &[f64; 2]| p[0] * axis[0] + p[1] * axis[1];
            let (amin, amax) = ca
                .iter()
                .map(proj)
                .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let (bmin, bmax) = cb
                .iter()
                .map(proj)
                .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if amax < bmin || bmax < amin {
                return false;
            }
        }
    }
    true
}

fn sample_agent(cfg: &ScenarioConfig, rng: &mut DetRng, id: u32) -> AgentState {
    let lanes = cfg.lanes_per_side as i64;
    let lane = rng.below((2 * lanes + 1) as u64) as i64 - lanes;
    let parked = lanes > 0 && lane.abs() == lanes;
    let oncoming = lane > 0;
    let lateral = lane as f64 * cfg.lane_width;
    let longitudinal = rng.range(-cfg.spawn_half_length, cfg.spawn_half_length);
    let length = rng.range(cfg.length_range.0, cfg.length_range.1);
    let width = rng.range(cfg.width_range.0, cfg.width_range.1);
    let heading = if oncoming { std::f64::consts::PI } else { 0.0 };
    let (speed, yaw_rate, yaw_jitter) = if parked {
        (0.0, 0.0, 0.0)
    } else {
        (
            rng.range(cfg.speed_range.0, cfg.speed_range.1),
            rng.range(-cfg.max_yaw_rate, cfg.max_yaw_rate),
            rng.range(-0.05, 0.05),
        )
    };
    AgentState {
        id,
        pose: Pose2D::new(longitudinal, lateral, heading + yaw_jitter),
        length,
        width,
        speed,
        yaw_rate,
        spawn_frame: 0,
        despawn_frame: cfg.num_frames,
    }
}

fn trajectory(agent: &AgentState, cfg: &ScenarioConfig) -> Vec<AgentState> {
    let mut states = Vec::with_capacity(cfg.num_frames);
    let mut s = *agent;
    for _ in 0..cfg.num_frames {
        states.push(s);
        s = step_agent(&s, cfg.dt);
    }
    states
}

fn inflated(a: &AgentState, margin: f64) -> Footprint {
    Footprint {
        pose: a.pose,
        length: a.length + margin,
        width: a.width + margin,
    }
}

fn draw_scenario(
    cfg: &ScenarioConfig,
    ego: &[Pose2D],
    rng: &mut DetRng,
) -> Result<Vec<Vec<AgentState>>> {
    let ego_fp: Vec<Footprint> = ego
        .iter()
        .map(|&pose| Footprint {
            pose,
            length: EGO_LENGTH + cfg.clearance,
            width: EGO_WIDTH + cfg.clearance,
        })
        .collect();
    let mut placed: Vec<Vec<AgentState>> = Vec::with_capacity(cfg.num_agents);
    for i in 0..cfg.num_agents {
        let id = i as u32 + 1;
        let mut accepted = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let traj = trajectory(&sample_agent(cfg, rng, id), cfg);
            let clear = traj.iter().enumerate().all(|(f, s)| {
                let fp = inflated(s, cfg.clearance);
                !rects_overlap(&fp, &ego_fp[f])
                    && placed
                        .iter()
                        .all(|other| !rects_overlap(&fp, &inflated(&other[f], cfg.clearance)))
            });
            if clear {
                accepted = Some(traj);
                break;
            }
        }
        match accepted {
            Some(traj) => placed.push(traj),
            None => {
                return Err(Error::InvalidConfig(format!(
                    "could not place agent {id} with {} m clearance after {PLACEMENT_ATTEMPTS} attempts",
                    cfg.clearance
                )))
            }
        }
    }
    Ok(placed)
}

fn covers_every_frame(cfg: &ScenarioConfig, ego: &[Pose2D], agents: &[Vec<AgentState>]) -> bool {
    if agents.is_empty() {
        return true;
    }
    ego.iter().enumerate().all(|(f, &pose)| {
        let window = Footprint {
            pose,
            length: 2.0 * cfg.window_half_extent,
            width: 2.0 * cfg.window_half_extent,
        };
        agents
            .iter()
            .any(|traj| rects_overlap(&inflated(&traj[f], 0.0), &window))
    })
}

/// Generates a scenario; the result is a pure function of `cfg`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let ego = ego_trajectory(cfg);
    let mut rng = DetRng::new(cfg.seed, streams::AGENTS);
    for attempt in 0..SCENARIO_ATTEMPTS {
        if attempt > 0 {
            rng = DetRng::new(cfg.seed ^ attempt as u64, streams::RETRY);
        }
        let agents = draw_scenario(cfg, &ego, &mut rng)?;
        if !covers_every_frame(cfg, &ego, &agents) {
            continue;
        }
        let frames = ego
            .iter()
            .enumerate()
            .map(|(f, &ego)| Frame {
                ego,
                agents: agents
                    .iter()
                    .map(|t| t[f])
                    .filter(|a| a.alive_at(f))
                    .collect(),
            })
            .collect();
        return Ok(Scenario {
            dt: cfg.dt,
            seed: cfg.seed,
            frames,
        });
    }
    Err(Error::InvalidConfig(format!(
        "no scenario with an agent in the window every frame after {SCENARIO_ATTEMPTS} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_agents_only_ego() {
        let s = simulate(&ScenarioConfig::long_range(0, 8, 1)).unwrap();
        assert_eq!(s.num_frames(), 8);
        assert!(s.frames.iter().all(|f| f.agents.is_empty()));
        assert!((s.frames[1].ego.x - 2.5).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = ScenarioConfig::long_range(10, 20, 42);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        let other = ScenarioConfig { seed: 43, ..cfg };
        assert_ne!(
            simulate(&other).unwrap(),
            simulate(&ScenarioConfig::long_range(10, 20, 42)).unwrap()
        );
    }

    #[test]
    fn speeds_within_bounds_and_clear() {
        for seed in 0..5 {
            let cfg = ScenarioConfig::long_range(12, 20, seed);
            let s = simulate(&cfg).unwrap();
            for f in &s.frames {
                assert_eq!(f.agents.len(), 12);
                for a in &f.agents {
                    assert!(a.speed <= cfg.speed_range.1);
                    assert!(a.speed == 0.0 || a.speed >= cfg.speed_range.0);
                    assert!(a.yaw_rate.abs() <= cfg.max_yaw_rate);
                }
                for (i, a) in f.agents.iter().enumerate() {
                    for b in &f.agents[i + 1..] {
                        assert!(!rects_overlap(&inflated(a, 0.0), &inflated(b, 0.0)));
                    }
                }
            }
        }
    }

    #[test]
    fn window_is_never_empty() {
        let cfg = ScenarioConfig::short_range(6, 12, 9);
        let s = simulate(&cfg).unwrap();
        for f in &s.frames {
            let window = Footprint {
                pose: f.ego,
                length: 30.0,
                width: 30.0,
            };
            assert!(f
                .agents
                .iter()
                .any(|a| rects_overlap(&inflated(a, 0.0), &window)));
        }
    }

    #[test]
    fn ego_profiles() {
        let base = ScenarioConfig::long_range(0, 14, 0);
        let turn = simulate(&ScenarioConfig {
            ego_profile: EgoProfile::ConstantTurn,
            ..base.clone()
        })
        .unwrap();
        assert!((turn.frames[10].ego.yaw - 0.5).abs() < 1e-12);
        let sg = simulate(&ScenarioConfig {
            ego_profile: EgoProfile::StopAndGo,
            ..base
        })
        .unwrap();
        // Driving during [0, 4) s, stopped during [4, 6) s.
        assert_eq!(sg.frames[9].ego, sg.frames[12].ego);
        assert!(sg.frames[13].ego.x > sg.frames[12].ego.x);
    }

    #[test]
    fn invalid_configs_rejected() {
        let ok = ScenarioConfig::long_range(3, 10, 0);
        assert!(simulate(&ScenarioConfig {
            dt: 0.0,
            ..ok.clone()
        })
        .is_err());
        assert!(simulate(&ScenarioConfig {
            num_frames: 0,
            ..ok.clone()
        })
        .is_err());
        assert!(simulate(&ScenarioConfig {
            speed_range: (5.0, 1.0),
            ..ok.clone()
        })
        .is_err());
        // Far more agents than the road can hold.
        assert!(simulate(&ScenarioConfig {
            num_agents: 500,
            ..ok
        })
        .is_err());
    }
}
