//! Command-line experiments for stochastic Poisson integrators.

pub mod args;
pub mod commands;
pub mod config;
pub mod custom;
pub mod error;
pub mod expr;
pub mod model;
pub mod output;

pub use args::{run, Cli};
pub use config::{ExperimentConfig, Overrides, SystemKind};
pub use error::{CliError, CliResult};
