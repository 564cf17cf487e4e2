//! Dataset sweeps over the `kpo-core` simulation and the plumbing of
//! the `kpo` command-line tool: configs, CSV output and the experiment runs.

pub mod config;
pub mod csv;
pub mod error;
pub mod runs;

pub use config::{validate_config, Experiment, ExperimentConfig, Value};
pub use csv::Dataset;
pub use error::{ExperimentError, Result};
pub use runs::run_experiment;
