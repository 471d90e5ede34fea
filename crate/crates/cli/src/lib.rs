//! Command implementations behind the `bevinst` binary.

pub mod bench;
pub mod commands;
pub mod config;
pub mod render;
pub mod store;

pub use bench::{cmd_bench, run_bench, BenchConfig, BenchRow};
pub use commands::{cmd_associate, cmd_eval, cmd_labels, cmd_predict, cmd_simulate};
pub use config::{ExperimentConfig, Preset};
pub use render::cmd_render;
