//! CLI failure classes and their exit codes.

use std::path::Path;

use hybridj::dataset::DatasetError;
use hybridj::harness::HarnessError;
use hybridj::scoring::ScoringError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: malformed config, inconsistent data, impossible request.
    #[error("{0}")]
    Validation(String),
    /// Unreadable or unwritable file or directory.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        CliError::Validation(e.to_string())
    }
}
