//! Reproducible experiment runner: configs in, CSV artifacts and a manifest out.

pub mod config;
pub mod manifest;
pub mod scenario;

pub use config::{ExperimentConfig, Scenario};
pub use manifest::Manifest;
pub use scenario::run_scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] mechrecon::Error),
}
