//! Command-line orchestration for unrolled thresholding networks: config
//! parsing, scenario wiring, the experiment grid, and the report commands.

pub mod commands;
pub mod config;
pub mod exit;
pub mod runner;
pub mod scenario;

pub use commands::{resolve_config, GlobalOptions};
pub use config::ExperimentConfig;
pub use exit::CliError;
