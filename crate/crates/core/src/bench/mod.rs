//! Monte Carlo benchmark harness.

pub mod config;
pub mod metrics;
pub mod report;
pub mod runner;

pub use config::{preset, ExperimentConfig, LayoutSpec, Method, PRESETS};
pub use metrics::{resolution_probability, rmse, Angles};
pub use report::emit_report;
pub use runner::{run_monte_carlo, MetricsRow, MetricsTable, RunOutput, TrialRecord};
