//! Experiment runner for the secure ISAC beamforming designs: scenario
//! parsing, solver dispatch and CSV/report output.

pub mod output;
pub mod runner;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] isac_core::error::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
