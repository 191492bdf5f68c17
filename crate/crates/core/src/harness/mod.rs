//! Monte-Carlo experiments: configuration, figure presets, execution,
//! aggregation, export and the command-line interface.

pub mod cli;
pub mod config;
pub mod reference;
pub mod results;
pub mod run;
pub mod validate;

pub use config::{Averaging, ExperimentConfig, FailureSpec, Figure, Mode, Pipeline, RcsSpec, Scale, SystemSpec};
pub use results::{AggregatePoint, Aggregates, Format, RealizationInfo, ResultRow, ResultsTable};
pub use run::{child_seed, run_experiment, run_experiment_with_threads};
