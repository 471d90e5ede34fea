use std::collections::BTreeMap;

use crate::grid::InstanceGrid;

use super::IdCounter;

/// 8-connected components of `mask` (row-major `h x w`). Returns a component index
/// per cell (`usize::MAX` off the mask) and the component count; components are
/// numbered in row-major order of their first cell.
pub fn connected_components(mask: &[bool], h: usize, w: usize) -> (Vec<usize>, usize) {
    assert_eq!(mask.len(), h * w, "mask size");
    let mut label = vec![usize::MAX; h * w];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            for nr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    let j = nr * w + nc;
                    if mask[j] && label[j] == usize::MAX {
                        label[j] = count;
                        stack.push(j);
                    }
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Labels the masked cells of `inst` that are still 0. Within each 8-connected
/// component of `mask`, they take the most frequent ID among already-labeled cells
/// (ties to the ID seen first in row-major order), or one fresh ID if the component
/// has none.
pub fn resolve_unlabeled(inst: &mut InstanceGrid, mask: &[bool], ids: &mut IdCounter) {
    let (h, w) = inst.shape();
    let (label, count) = connected_components(mask, h, w);
    // Per component: ID -> (count, first cell index).
    let mut votes: Vec<BTreeMap<u32, (usize, usize)>> = vec![BTreeMap::new(); count];
    let mut needs = vec![false; count];
    for (i, &comp) in label.iter().enumerate() {
        if comp == usize::MAX {
            continue;
        }
        match inst.ids()[i] {
            0 => needs[comp] = true,
            id => votes[comp].entry(id).or_insert((0, i)).0 += 1,
        }
    }
    let fill: Vec<u32> = (0..count)
        .map(|k| {
            if !needs[k] {
                return 0;
            }
            votes[k]
                .iter()
                .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
                .map_or_else(|| ids.fresh(), |(&id, _)| id)
        })
        .collect();
    for (i, &comp) in label.iter().enumerate() {
        if comp != usize::MAX && inst.ids()[i] == 0 {
            inst.set(i / w, i % w, fill[comp]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> (Vec<bool>, usize, usize) {
        let h = rows.len();
        let w = rows[0].len();
        (
            rows.iter()
                .flat_map(|r| r.chars().map(|c| c != '.'))
                .collect(),
            h,
            w,
        )
    }

    #[test]
    fn diagonal_cells_connect() {
        let (m, h, w) = mask(&["#...", ".#..", "...#", "...#"]);
        let (label, n) = connected_components(&m, h, w);
        assert_eq!(n, 2);
        assert_eq!(label[0], label[5]);
        assert_ne!(label[0], label[11]);
        assert_eq!(label[11], label[15]);
        assert_eq!(label[1], usize::MAX);
    }

    #[test]
    fn majority_vote_and_fresh_ids() {
        let (m, h, w) = mask(&["###..", "###..", ".....", "...##"]);
        let mut inst = InstanceGrid::zeros(h, w);
        inst.set(0, 0, 4);
        inst.set(0, 1, 4);
        inst.set(1, 2, 9);
        let mut ids = IdCounter::after(9);
        resolve_unlabeled(&mut inst, &m, &mut ids);
        assert_eq!(inst.get(1, 0), 4);
        assert_eq!(inst.get(1, 2), 9, "labeled cells keep their ID");
        assert_eq!(inst.get(0, 2), 4);
        assert_eq!(inst.get(3, 3), 10);
        assert_eq!(inst.get(3, 4), 10);
        assert_eq!(inst.get(2, 2), 0);
    }

    #[test]
    fn vote_ties_go_to_first_seen_id() {
        let (m, h, w) = mask(&["###"]);
        let mut inst = InstanceGrid::zeros(h, w);
        inst.set(0, 0, 7);
        inst.set(0, 2, 3);
        resolve_unlabeled(&mut inst, &m, &mut IdCounter::new());
        assert_eq!(inst.get(0, 1), 7);
    }
}
