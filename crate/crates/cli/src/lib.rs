//! Configuration, file formats and subcommands of the `su11` tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{cmd_fit, cmd_fringe, cmd_montecarlo, cmd_sweep, FitOverrides};
pub use config::RunConfig;
pub use error::{CliError, Result};
