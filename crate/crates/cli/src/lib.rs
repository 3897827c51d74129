//! Command-line front end for `rkhslab`: JSON configs in, JSON reports and
//! CSV files out.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::RunError;
