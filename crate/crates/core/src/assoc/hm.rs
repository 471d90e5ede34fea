use std::time::{Duration, Instant};

use crate::grid::{nearest_cell, Center, CenterList, FlowGrid, InstanceGrid, SegGrid};

use super::{extract_centers, hungarian, nearest_center, AssocConfig, IdCounter};

/// Assigns every foreground cell to the center nearest to `p + offset(p)`.
/// With no centers the result is empty.
pub fn cluster_pixels(
    seg: &SegGrid,
    offset: &FlowGrid,
    centers: &[Center],
    cfg: &AssocConfig,
) -> InstanceGrid {
    let (h, w) = seg.shape();
    let mask = seg.binarize(cfg.seg_binarize_threshold);
    let mut inst = InstanceGrid::zeros(h, w);
    if centers.is_empty() {
        return inst;
    }
    for r in 0..h {
        for c in 0..w {
            if !mask[r * w + c] {
                continue;
            }
            let (dy, dx) = offset.get(r, c);
            if let Some((center, _)) =
                nearest_center(centers, r as f64 + dy as f64, c as f64 + dx as f64)
            {
                inst.set(r, c, center.id);
            }
        }
    }
    inst
}

/// Links `current` centers (fresh detections) to `previous` tracked centers.
///
/// Each previous center is moved by the forward flow read at its own cell, then
/// matched to the current centers by Hungarian assignment on Euclidean distance.
/// Pairs farther apart than the gating radius are dropped; every current center
/// without a match receives a fresh ID.
pub fn hm_link(
    previous: &[Center],
    fwd_flow_prev: &FlowGrid,
    current: &CenterList,
    cfg: &AssocConfig,
    ids: &mut IdCounter,
) -> Vec<Center> {
    let (h, w) = fwd_flow_prev.shape();
    let projected: Vec<(f64, f64)> = previous
        .iter()
        .map(|p| match nearest_cell(h, w, p.row, p.col) {
            Some((r, c)) => {
                let (dy, dx) = fwd_flow_prev.get(r, c);
                (p.row + dy as f64, p.col + dx as f64)
            }
            None => (p.row, p.col),
        })
        .collect();
    let cost: Vec<Vec<f64>> = projected
        .iter()
        .map(|&(pr, pc)| {
            current
                .iter()
                .map(|c| ((c.row - pr).powi(2) + (c.col - pc).powi(2)).sqrt())
                .collect()
        })
        .collect();
    let mut ids_out: Vec<Option<u32>> = vec![None; current.len()];
    for (i, j) in hungarian(&cost).expect("finite distances") {
        if cost[i][j] <= cfg.gating_radius {
            ids_out[j] = Some(previous[i].id);
        }
    }
    current
        .iter()
        .zip(ids_out)
        .map(|(c, id)| Center {
            id: id.unwrap_or_else(|| ids.fresh()),
            ..*c
        })
        .collect()
}

/// Baseline association over one sequence of frames: per-frame clustering around
/// centerness peaks and frame-to-frame linking of the centers.
pub fn hm_associate(
    seg: &[SegGrid],
    centerness: &[SegGrid],
    offset: &[FlowGrid],
    fwd_flow: &[FlowGrid],
    cfg: &AssocConfig,
) -> Vec<InstanceGrid> {
    hm_run(seg, centerness, offset, fwd_flow, cfg, |_, _, _| {})
}

/// [`hm_associate`] reporting the duration of each stage of each frame.
pub(crate) fn hm_run(
    seg: &[SegGrid],
    centerness: &[SegGrid],
    offset: &[FlowGrid],
    fwd_flow: &[FlowGrid],
    cfg: &AssocConfig,
    mut record: impl FnMut(&'static str, usize, Duration),
) -> Vec<InstanceGrid> {
    let mut ids = IdCounter::new();
    let mut tracked: Vec<Center> = Vec::new();
    let mut out = Vec::with_capacity(seg.len());
    for t in 0..seg.len() {
        let clock = Instant::now();
        let detected = extract_centers(&centerness[t], cfg);
        record("centers", t, clock.elapsed());

        let clock = Instant::now();
        tracked = if t == 0 {
            detected
                .iter()
                .map(|c| Center {
                    id: ids.fresh(),
                    ..*c
                })
                .collect()
        } else {
            hm_link(&tracked, &fwd_flow[t - 1], &detected, cfg, &mut ids)
        };
        record("matching", t, clock.elapsed());

        let clock = Instant::now();
        out.push(cluster_pixels(&seg[t], &offset[t], &tracked, cfg));
        record("clustering", t, clock.elapsed());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assoc::AssocMode;

    fn cfg() -> AssocConfig {
        AssocConfig {
            pool_kernel: 7,
            ..AssocConfig::long_range(AssocMode::Hm)
        }
    }

    fn center(id: u32, row: f64, col: f64) -> Center {
        Center {
            id,
            row,
            col,
            score: 1.0,
        }
    }

    #[test]
    fn clustering_follows_offsets() {
        let seg = SegGrid::from_fn(10, 10, |r, _| if r < 4 { 1.0 } else { 0.0 });
        let mut offset = FlowGrid::zeros(10, 10);
        for c in 0..10 {
            for r in 0..4 {
                let target = if c < 5 { 1.0 } else { 8.0 };
                offset.set(r, c, (1.0 - r as f32, target - c as f32));
            }
        }
        let centers = [center(3, 1.0, 1.0), center(5, 1.0, 8.0)];
        let inst = cluster_pixels(&seg, &offset, &centers, &cfg());
        assert_eq!(inst.get(0, 0), 3);
        assert_eq!(inst.get(3, 4), 3);
        assert_eq!(inst.get(2, 5), 5);
        assert_eq!(inst.get(5, 5), 0);
        assert_eq!(
            cluster_pixels(&seg, &offset, &[], &cfg()).foreground_count(),
            0
        );
    }

    #[test]
    fn linking_respects_forward_flow_and_gate() {
        let mut fwd = FlowGrid::zeros(50, 50);
        fwd.set(10, 10, (0.0, 5.0));
        let prev = [center(1, 10.0, 10.0), center(2, 30.0, 30.0)];
        let current = CenterList::new(vec![
            center(1, 10.0, 15.0),
            center(2, 10.0, 9.0),
            center(3, 45.0, 45.0),
        ])
        .unwrap();
        let mut ids = IdCounter::after(2);
        let linked = hm_link(&prev, &fwd, &current, &cfg(), &mut ids);
        assert_eq!(
            linked.iter().map(|c| c.id).collect::<Vec<_>>(),
            vec![1, 3, 4]
        );
    }

    #[test]
    fn static_agent_keeps_one_id() {
        let inst = InstanceGrid::from_fn(40, 40, |r, c| {
            u32::from((10..14).contains(&r) && (10..18).contains(&c)) * 7
        });
        let centers = crate::labelgen::compute_centers(&inst);
        let seg = SegGrid::from_instances(&inst);
        let centerness = crate::labelgen::compute_centerness(&inst, &centers, 3.0).unwrap();
        let offset = crate::labelgen::compute_offsets(&inst, &centers).unwrap();
        let flow = FlowGrid::zeros(40, 40);
        let n = 5;
        let out = hm_associate(
            &vec![seg; n],
            &vec![centerness; n],
            &vec![offset; n],
            &vec![flow; n],
            &cfg(),
        );
        for frame in &out {
            assert_eq!(frame, &inst.relabel(|id| u32::from(id != 0)));
        }
    }
}
