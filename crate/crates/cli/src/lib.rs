//! Command-line workflows and the HTTP prediction service.

pub mod args;
pub mod commands;
pub mod error;
pub mod server;

pub use args::Cli;
pub use error::{CliError, CliResult, ExitKind};
