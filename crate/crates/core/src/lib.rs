//! Bird's-eye-view instance prediction toolkit.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] and [`io`]: raster types, rigid geometry and the `BGRD` binary container.
//! * [`sim`]: a deterministic kinematic traffic simulator and a noise model that turns
//!   ground-truth labels into imperfect "predictions".
//! * [`labelgen`]: ground-truth label rendering (segmentation, instances, centerness,
//!   offsets, forward flow and backward centripetal flow).
//! * [`assoc`]: the two post-processing pipelines, backward-flow warping and the
//!   centerness/offset/forward-flow baseline with Hungarian matching.
//! * [`metrics`] and [`losses`]: IoU / VPQ evaluation and forward loss evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` rejects NaN as well.

pub mod assoc;
pub mod error;
pub mod grid;
pub mod io;
pub mod labelgen;
pub mod losses;
pub mod metrics;
pub mod sim;

pub use error::{Error, Result};
pub use grid::{Center, CenterList, FlowGrid, GridSpec, InstanceGrid, Pose2D, SegGrid};
