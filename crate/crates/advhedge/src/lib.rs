//! Command line, configuration and file formats for adversarial deep
//! hedging experiments. The algorithms live in `advhedge-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

pub use cli::main_with;
pub use config::ExperimentConfig;
pub use error::CliError;
