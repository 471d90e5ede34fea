use crate::grid::{nearest_cell, CenterList, FlowGrid, InstanceGrid, SegGrid};

use super::{components::resolve_unlabeled, nearest_center, AssocConfig, IdCounter};

/// Groups the first predicted frame around the previous frame's centers.
///
/// Each foreground cell follows its backward flow and takes the ID of the nearest
/// center (ties to the smaller ID). Cells with no center within
/// `first_frame_radius`, and every cell when there are no centers, are resolved per
/// connected component (majority of labeled neighbours or a fresh ID).
pub fn assign_first_frame(
    seg: &SegGrid,
    back_flow: &FlowGrid,
    centers_prev: &CenterList,
    cfg: &AssocConfig,
    ids: &mut IdCounter,
) -> InstanceGrid {
    let (h, w) = seg.shape();
    let mask = seg.binarize(cfg.seg_binarize_threshold);
    let mut inst = InstanceGrid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            if !mask[r * w + c] {
                continue;
            }
            let (dy, dx) = back_flow.get(r, c);
            let (tr, tc) = (r as f64 + dy as f64, c as f64 + dx as f64);
            if let Some((center, dist)) = nearest_center(centers_prev.iter(), tr, tc) {
                if cfg.first_frame_radius.is_none_or(|radius| dist <= radius) {
                    inst.set(r, c, center.id);
                }
            }
        }
    }
    resolve_unlabeled(&mut inst, &mask, ids);
    inst
}

/// Propagates IDs from `inst_prev`: each foreground cell copies the ID found at the
/// nearest cell to `p + back_flow(p)`. Cells whose destination is background or
/// outside the grid are resolved per connected component.
pub fn warp_associate(
    seg: &SegGrid,
    back_flow: &FlowGrid,
    inst_prev: &InstanceGrid,
    cfg: &AssocConfig,
    ids: &mut IdCounter,
) -> InstanceGrid {
    let (h, w) = seg.shape();
    let mask = seg.binarize(cfg.seg_binarize_threshold);
    let mut inst = InstanceGrid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            if !mask[r * w + c] {
                continue;
            }
            let (dy, dx) = back_flow.get(r, c);
            if let Some((pr, pc)) = nearest_cell(h, w, r as f64 + dy as f64, c as f64 + dx as f64) {
                inst.set(r, c, inst_prev.get(pr, pc));
            }
        }
    }
    resolve_unlabeled(&mut inst, &mask, ids);
    inst
}
