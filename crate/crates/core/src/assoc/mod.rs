//! Instance association: turning per-frame predictions into temporally consistent
//! instance maps.
//!
//! Two pipelines share the same center extraction:
//!
//! * **warp** groups the first predicted frame around centers extracted from the
//!   present-frame segmentation, then propagates IDs pixel by pixel by following the
//!   backward flow into the previous instance map;
//! * **hm** clusters each frame around centerness peaks using offsets and links
//!   the clusters across frames by Hungarian matching of forward-projected centers.

mod centers;
mod components;
mod hm;
mod hungarian;
mod pipeline;
mod warp;

use std::str::FromStr;

use crate::error::{Error, Result};

pub use centers::{extract_centers, max_pool};
pub use components::{connected_components, resolve_unlabeled};
pub use hm::{cluster_pixels, hm_associate, hm_link};
pub use hungarian::{assignment_cost, hungarian};
pub use pipeline::{run_pipeline, Modalities, PipelineOutput, StageTiming, TimingReport};
pub use warp::{assign_first_frame, warp_associate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssocMode {
    Warp,
    Hm,
}

impl AssocMode {
    pub fn name(&self) -> &'static str {
        match self {
            AssocMode::Warp => "warp",
            AssocMode::Hm => "hm",
        }
    }
}

impl FromStr for AssocMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warp" => Ok(AssocMode::Warp),
            "hm" => Ok(AssocMode::Hm),
            other => Err(Error::InvalidConfig(format!(
                "unknown association mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocConfig {
    /// Side of the square max-pooling window, odd.
    pub pool_kernel: usize,
    pub center_threshold: f32,
    pub seg_binarize_threshold: f32,
    pub mode: AssocMode,
    /// Largest accepted distance (cells) between a projected and a detected center.
    pub gating_radius: f64,
    /// First-frame grouping only accepts centers within this distance (cells) of the
    /// warped pixel; farther pixels are treated as new instances. `None` disables it.
    pub first_frame_radius: Option<f64>,
}

impl AssocConfig {
    pub fn long_range(mode: AssocMode) -> Self {
        Self {
            pool_kernel: 23,
            center_threshold: 0.1,
            seg_binarize_threshold: 0.5,
            mode,
            gating_radius: 8.0,
            first_frame_radius: Some(8.0),
        }
    }

    pub fn short_range(mode: AssocMode) -> Self {
        Self {
            pool_kernel: 7,
            first_frame_radius: Some(24.0),
            ..Self::long_range(mode)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_kernel < 3 || self.pool_kernel.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "pool_kernel must be odd and at least 3, got {}",
                self.pool_kernel
            )));
        }
        let unit = |v: f32| (0.0..=1.0).contains(&v);
        if !unit(self.center_threshold) || !unit(self.seg_binarize_threshold) {
            return Err(Error::InvalidConfig("thresholds must lie in [0, 1]".into()));
        }
        if !(self.gating_radius >= 0.0) {
            return Err(Error::InvalidConfig(
                "gating_radius must be non-negative".into(),
            ));
        }
        if matches!(self.first_frame_radius, Some(r) if !(r >= 0.0)) {
            return Err(Error::InvalidConfig(
                "first_frame_radius must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Source of fresh instance IDs within one pipeline run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdCounter {
    next: u32,
}

impl IdCounter {
    pub fn new() -> Self {
        Self { next: 1 }
    }

    /// Counter whose first ID is `last + 1`.
    pub fn after(last: u32) -> Self {
        Self { next: last + 1 }
    }

    pub fn fresh(&mut self) -> u32 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u32 {
        self.next
    }
}

impl Default for IdCounter {
    fn default() -> Self {
        Self::new()
    }
}

/// Index of the center nearest to `(row, col)`; ties go to the smaller ID.
pub(crate) fn nearest_center<'a>(
    centers: impl IntoIterator<Item = &'a crate::grid::Center>,
    row: f64,
    col: f64,
) -> Option<(&'a crate::grid::Center, f64)> {
    let mut best: Option<(&crate::grid::Center, f64)> = None;
    for c in centers {
        let d2 = (c.row - row).powi(2) + (c.col - col).powi(2);
        best = match best {
            Some((b, bd)) if bd < d2 || (bd == d2 && b.id < c.id) => Some((b, bd)),
            _ => Some((c, d2)),
        };
    }
    best.map(|(c, d2)| (c, d2.sqrt()))
}
