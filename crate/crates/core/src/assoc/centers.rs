use std::collections::VecDeque;

use crate::grid::{Center, CenterList, Grid, SegGrid};

use super::AssocConfig;

/// Sliding maximum of `src` over a centered window of `k` samples, truncated at the ends.
fn sliding_max(src: &[f32], k: usize, out: &mut [f32]) {
    let half = k / 2;
    let n = src.len();
    let mut window: VecDeque<usize> = VecDeque::with_capacity(k);
    let mut next = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while window.back().is_some_and(|&j| src[j] <= src[next]) {
                window.pop_back();
            }
            window.push_back(next);
            next += 1;
        }
        while window.front().is_some_and(|&j| j + half < i) {
            window.pop_front();
        }
        *slot = src[*window.front().expect("window never empty")];
    }
}

/// `k x k` max-pooling with stride 1; the window is clipped at the grid border.
pub fn max_pool(grid: &Grid<f32>, k: usize) -> Grid<f32> {
    let (h, w) = grid.shape();
    let mut rows = vec![0.0f32; h * w];
    for r in 0..h {
        sliding_max(
            &grid.as_slice()[r * w..(r + 1) * w],
            k,
            &mut rows[r * w..(r + 1) * w],
        );
    }
    let mut out = vec![0.0f32; h * w];
    let mut col = vec![0.0f32; h];
    let mut pooled = vec![0.0f32; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = rows[r * w + c];
        }
        sliding_max(&col, k, &mut pooled);
        for r in 0..h {
            out[r * w + c] = pooled[r];
        }
    }
    Grid::from_vec(h, w, out).expect("shape preserved")
}

/// Local maxima of `map`: cells equal to the window maximum and at least the center
/// threshold. A connected plateau of equal maxima yields one center, at its
/// lexicographically smallest cell. IDs are assigned 1.. in row-major order.
pub fn extract_centers(map: &SegGrid, cfg: &AssocConfig) -> CenterList {
    let (h, w) = map.shape();
    let pooled = max_pool(map.grid(), cfg.pool_kernel);
    let values = map.values();
    let is_peak: Vec<bool> = values
        .iter()
        .zip(pooled.as_slice())
        .map(|(&v, &m)| v >= cfg.center_threshold && v > 0.0 && v == m)
        .collect();
    let mut seen = vec![false; h * w];
    let mut entries = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !is_peak[start] || seen[start] {
            continue;
        }
        // Row-major scan order means `start` is the plateau's smallest cell.
        let value = values[start];
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    if is_peak[j] && !seen[j] && values[j] == value {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        entries.push(Center {
            id: entries.len() as u32 + 1,
            row: (start / w) as f64,
            col: (start % w) as f64,
            score: value,
        });
    }
    CenterList::new(entries).expect("sequential ids")
}
