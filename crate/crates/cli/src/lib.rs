//! Command-line front end for the `cbwk` library: regret experiments on
//! presets or instance files, and the estimator test suites.

pub mod args;
pub mod commands;
pub mod config;

pub use config::{load_config, save_config, ExperimentConfig};

/// Exit code for a run whose suite or invariant check failed.
pub const EXIT_FAILURE: u8 = 1;
/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] cbwk::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
