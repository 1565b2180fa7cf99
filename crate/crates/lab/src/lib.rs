//! Configuration, report formats and the command-line front end for `mlsi-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod report;
pub mod run;

pub use config::{Check, ExperimentConfig, Overrides, Resolved};
pub use error::{LabError, LabResult};
pub use report::Report;
pub use run::{run_file, Experiment, RunOutput};
