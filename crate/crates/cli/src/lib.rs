//! Experiment runner for safebo: configuration files, repeated runs,
//! summary statistics and trajectory export.

pub mod config;
pub mod experiment;
pub mod stats;
pub mod summary;
pub mod trace;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig};
pub use experiment::{load_run, load_runs, run_experiment, Manifest, RunFile, RunStatus};
pub use stats::{ranksum, RankSum};
pub use summary::{summarize, SummaryReport};
pub use trace::{export_trace, read_trace, write_trace};
