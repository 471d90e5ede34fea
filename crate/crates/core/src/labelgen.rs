//! Ground-truth label rendering.
//!
//! All frames of one sample are rendered into a single window anchored at the ego
//! pose of the present frame, so static agents keep identical footprints across
//! time and their flow is exactly zero. Flows are computed from the instance maps
//! of adjacent frames directly, with no intermediate warping.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{Center, CenterList, FlowGrid, GridSpec, InstanceGrid, SegGrid};
use crate::sim::{AgentState, Scenario};

const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    /// Gaussian width of the centerness heatmap, in cells.
    pub centerness_sigma: f64,
    /// Flow vectors shorter than this (cells) are zeroed.
    pub flow_threshold: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            centerness_sigma: 3.0,
            flow_threshold: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabels {
    /// Time index relative to the first predicted frame; the present frame is -1.
    pub t: i32,
    pub seg: SegGrid,
    pub inst: InstanceGrid,
    pub centers: CenterList,
    pub centerness: SegGrid,
    pub offset: FlowGrid,
    pub fwd_flow: FlowGrid,
    pub back_flow: FlowGrid,
}

/// Labels for the present frame (`t = -1`) followed by the predicted frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    pub spec: GridSpec,
    pub cfg: LabelConfig,
    pub frames: Vec<FrameLabels>,
}

impl LabelSet {
    /// Number of predicted frames (excluding the present one).
    pub fn horizon(&self) -> usize {
        self.frames.len().saturating_sub(1)
    }

    pub fn future(&self) -> &[FrameLabels] {
        &self.frames[1..]
    }
}

/// Renders agent footprints; a cell belongs to an agent when its center lies in the
/// half-open rectangle `[-L/2, L/2) x [-W/2, W/2)` of the agent frame. Overlaps go
/// to the smaller ID.
pub fn rasterize_frame(agents: &[AgentState], spec: &GridSpec) -> (InstanceGrid, SegGrid) {
    let (h, w) = spec.shape();
    let mut inst = InstanceGrid::zeros(h, w);
    let mut sorted: Vec<&AgentState> = agents.iter().collect();
    sorted.sort_by_key(|a| std::cmp::Reverse(a.id));
    for a in sorted {
        let cells: Vec<(f64, f64)> = a
            .corners()
            .iter()
            .map(|&p| spec.local_to_cell(spec.anchor.to_local(p)))
            .collect();
        let rmin = cells
            .iter()
            .map(|c| c.0)
            .fold(f64::MAX, f64::min)
            .floor()
            .max(0.0);
        let rmax = cells.iter().map(|c| c.0).fold(f64::MIN, f64::max).ceil();
        let cmin = cells
            .iter()
            .map(|c| c.1)
            .fold(f64::MAX, f64::min)
            .floor()
            .max(0.0);
        let cmax = cells.iter().map(|c| c.1).fold(f64::MIN, f64::max).ceil();
        if rmax < 0.0 || cmax < 0.0 || rmin >= h as f64 || cmin >= w as f64 {
            continue;
        }
        let (hl, hw) = (a.length / 2.0, a.width / 2.0);
        for r in rmin as usize..=(rmax as usize).min(h - 1) {
            for c in cmin as usize..=(cmax as usize).min(w - 1) {
                let world = spec.anchor.to_world(spec.cell_to_local(r as f64, c as f64));
                let [u, v] = a.pose.to_local(world);
                if u >= -hl - EDGE_EPS
                    && u < hl - EDGE_EPS
                    && v >= -hw - EDGE_EPS
                    && v < hw - EDGE_EPS
                {
                    inst.set(r, c, a.id);
                }
            }
        }
    }
    let seg = SegGrid::from_instances(&inst);
    (inst, seg)
}

/// Per-ID centroid of occupied cells.
pub fn compute_centers(inst: &InstanceGrid) -> CenterList {
    let mut acc: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
    let (h, w) = inst.shape();
    for r in 0..h {
        for c in 0..w {
            let id = inst.get(r, c);
            if id != 0 {
                let e = acc.entry(id).or_insert((0.0, 0.0, 0));
                e.0 += r as f64;
                e.1 += c as f64;
                e.2 += 1;
            }
        }
    }
    let entries = acc
        .into_iter()
        .map(|(id, (sr, sc, n))| Center {
            id,
            row: sr / n as f64,
            col: sc / n as f64,
            score: 1.0,
        })
        .collect();
    CenterList::new(entries).expect("ids from a map are unique")
}

fn center_map(centers: &CenterList) -> BTreeMap<u32, (f64, f64)> {
    centers.iter().map(|c| (c.id, (c.row, c.col))).collect()
}

/// Gaussian heatmap `exp(-d^2 / (2 sigma^2))`, where `d` is the distance to the cell
/// nearest the own instance center; zero on background.
pub fn compute_centerness(
    inst: &InstanceGrid,
    centers: &CenterList,
    sigma: f64,
) -> Result<SegGrid> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "centerness sigma must be positive, got {sigma}"
        )));
    }
    let map = center_map(centers);
    let (h, w) = inst.shape();
    let denom = 2.0 * sigma * sigma;
    let mut out = SegGrid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let id = inst.get(r, c);
            if id == 0 {
                continue;
            }
            let &(cr, cc) = map
                .get(&id)
                .ok_or_else(|| Error::Internal(format!("instance {id} has no center")))?;
            let d2 = (r as f64 - cr.round()).powi(2) + (c as f64 - cc.round()).powi(2);
            out.set(r, c, (-d2 / denom).exp() as f32);
        }
    }
    Ok(out)
}

fn vector_field(
    inst: &InstanceGrid,
    mut target: impl FnMut(u32, usize, usize) -> Result<(f64, f64)>,
) -> Result<FlowGrid> {
    let (h, w) = inst.shape();
    let mut out = FlowGrid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let id = inst.get(r, c);
            if id != 0 {
                let (dy, dx) = target(id, r, c)?;
                out.set(r, c, (dy as f32, dx as f32));
            }
        }
    }
    Ok(out)
}

/// Vector from each foreground cell to its own instance center.
pub fn compute_offsets(inst: &InstanceGrid, centers: &CenterList) -> Result<FlowGrid> {
    let map = center_map(centers);
    vector_field(inst, |id, r, c| {
        let &(cr, cc) = map
            .get(&id)
            .ok_or_else(|| Error::Internal(format!("instance {id} has no center")))?;
        Ok((cr - r as f64, cc - c as f64))
    })
}

/// Center displacement to the next frame broadcast over each instance; zero for
/// instances absent from `inst_next`.
pub fn compute_forward_flow(inst_t: &InstanceGrid, inst_next: &InstanceGrid) -> FlowGrid {
    let now = center_map(&compute_centers(inst_t));
    let next = center_map(&compute_centers(inst_next));
    vector_field(inst_t, |id, _, _| {
        Ok(match (now.get(&id), next.get(&id)) {
            (Some(a), Some(b)) => (b.0 - a.0, b.1 - a.1),
            _ => (0.0, 0.0),
        })
    })
    .expect("infallible")
}

/// Vector from each foreground cell to the previous-frame center of its instance,
/// or to its own center when the instance did not exist in the previous frame.
pub fn compute_backward_centripetal_flow(
    inst_t: &InstanceGrid,
    inst_prev: &InstanceGrid,
) -> FlowGrid {
    let now = center_map(&compute_centers(inst_t));
    let prev = center_map(&compute_centers(inst_prev));
    vector_field(inst_t, |id, r, c| {
        let &(cr, cc) = prev
            .get(&id)
            .or_else(|| now.get(&id))
            .expect("center of own id");
        Ok((cr - r as f64, cc - c as f64))
    })
    .expect("infallible")
}

/// Zeroes vectors whose magnitude is below `eps`.
pub fn threshold_flow(flow: &FlowGrid, eps: f64) -> Result<FlowGrid> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "flow threshold must be non-negative, got {eps}"
        )));
    }
    let (h, w) = flow.shape();
    let mut out = flow.clone();
    let eps2 = eps * eps;
    for r in 0..h {
        for c in 0..w {
            let (dy, dx) = flow.get(r, c);
            if ((dy as f64).powi(2) + (dx as f64).powi(2)) < eps2 {
                out.set(r, c, (0.0, 0.0));
            }
        }
    }
    Ok(out)
}

/// Renders labels for scenario frames `present ..= present + horizon`, all in the
/// window `spec` re-anchored at the present frame's ego pose.
pub fn generate_labels(
    scenario: &Scenario,
    spec: &GridSpec,
    present: usize,
    horizon: usize,
    cfg: &LabelConfig,
) -> Result<LabelSet> {
    let n = scenario.num_frames();
    if present + horizon >= n {
        return Err(Error::InvalidConfig(format!(
            "scenario has {n} frames, need frame {} (present {present} + horizon {horizon})",
            present + horizon
        )));
    }
    let spec = spec.with_anchor(scenario.frames[present].ego);
    let first = present.saturating_sub(1);
    let last = (present + horizon + 1).min(n - 1);
    let rendered: Vec<InstanceGrid> = (first..=last)
        .map(|f| rasterize_frame(&scenario.frames[f].agents, &spec).0)
        .collect();
    let inst_at = |f: usize| &rendered[f - first];
    let (h, w) = spec.shape();
    let empty = InstanceGrid::zeros(h, w);

    let mut frames = Vec::with_capacity(horizon + 1);
    for f in present..=present + horizon {
        let inst = inst_at(f).clone();
        let centers = compute_centers(&inst);
        let prev = if f > 0 { inst_at(f - 1) } else { &empty };
        let next = if f < n - 1 { inst_at(f + 1) } else { &empty };
        frames.push(FrameLabels {
            t: f as i32 - present as i32 - 1,
            seg: SegGrid::from_instances(&inst),
            centerness: compute_centerness(&inst, &centers, cfg.centerness_sigma)?,
            offset: compute_offsets(&inst, &centers)?,
            fwd_flow: threshold_flow(&compute_forward_flow(&inst, next), cfg.flow_threshold)?,
            back_flow: threshold_flow(
                &compute_backward_centripetal_flow(&inst, prev),
                cfg.flow_threshold,
            )?,
            inst,
            centers,
        });
    }
    Ok(LabelSet {
        spec,
        cfg: *cfg,
        frames,
    })
}
