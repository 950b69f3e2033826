//! Command-line front end: configuration, problem construction, artifact
//! persistence, and the `train`, `lsr`, `ilsr` and `experiment` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod task;

pub use commands::{cmd_experiment, cmd_ilsr, cmd_lsr, cmd_train, Overrides, Report, EXPERIMENTS};
pub use config::RunConfig;
pub use error::{CliError, Result};
