//! Command-line front end: configuration, output bookkeeping, plots and the
//! per-mode pipelines.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

pub use commands::{execute, RunReport};
pub use config::ExperimentConfig;
pub use error::CliError;

/// JSON schema of the experiment config.
pub const CONFIG_SCHEMA: &str = include_str!("../schema/experiment_config.schema.json");
