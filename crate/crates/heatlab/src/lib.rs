//! Experiment runner for `heatlab-core`: JSON configuration, the pipelines
//! behind each subcommand, and the CSV/JSON artifacts they write.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, ConfigError, Experiment, ExperimentConfig, Kind, Overrides};
pub use output::{write_bundle, Bundle, Csv, Invariant};
pub use run::{run_experiment, PipelineError};
