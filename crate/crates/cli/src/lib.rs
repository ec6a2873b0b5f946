//! Experiment runner: config files, parameter sweeps and CSV output on top
//! of `qoctrl-core`.

pub mod config;
pub mod runner;
pub mod table;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, SweepKind};
pub use runner::{run, run_sweep, RunError, SweepOutput};
pub use table::{Cell, Table};
