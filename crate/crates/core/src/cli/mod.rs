//! Command-line harness: run configuration, the twin experiment and the
//! individual stages with file-based handoff.

pub mod config;
pub mod pipeline;

pub use config::{parse_config, RunConfig};
pub use pipeline::{cmd_diagnose, cmd_ensemble, cmd_evaluate, cmd_fit, cmd_sample, cmd_twin, RunOptions, TwinReport};
