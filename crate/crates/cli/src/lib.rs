//! Command-line front end for `affine-lab-core`: run configs, pipelines
//! and JSON reports.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{Command, RunConfig};
pub use error::{CliError, Result};
pub use report::{Gate, Report, Verdict};
pub use run::{execute, run, RunOutput};
