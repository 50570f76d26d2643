//! Command line orchestration for `invmed`: run configuration, preset
//! experiments, heatmap export and the subcommand handlers.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod heatmap;

pub use error::{CliError, CliResult};
