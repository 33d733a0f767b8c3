//! Library side of the `nfsf` executable: configuration, run directories and subcommands.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use error::CliError;
