//! Command-line front end: configuration, artifacts and the end-to-end run.

pub mod artifacts;
pub mod clinical;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use error::{CliError, CliResult};
