//! Command-line front end for the `avgov` toolkit: scenario files, built-in
//! instances, and deterministic JSON/CSV reports.

pub mod builtin;
pub mod commands;
pub mod error;
pub mod format;
pub mod scenario;

pub use commands::{execute, Cli, Report};
pub use error::{CliError, Result};
