//! Command-line driver for the vortex solver: configuration parsing, command
//! dispatch and report serialization.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{run, CliError, Command, ExitKind, RunOptions};
