//! Orchestration layer for the beam-alignment toolkit: run configuration,
//! artifact file formats, figure/report exports, and the subcommand
//! implementations behind the `beamcred` binary.

pub mod commands;
pub mod config;
pub mod formats;
pub mod report;

use thiserror::Error;

/// Process-level error classes; each maps to a distinct exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Missing, malformed, or mismatched data artifacts (exit 3).
    #[error("data error: {0}")]
    Data(String),
    /// Numeric failure such as training divergence or a failed built-in
    /// verification (exit 4).
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<beamcred_core::Error> for CliError {
    fn from(e: beamcred_core::Error) -> Self {
        match e {
            beamcred_core::Error::InvalidArgument(msg) => CliError::Config(msg),
            beamcred_core::Error::DegenerateInput(msg) => CliError::Data(msg),
            beamcred_core::Error::TrainingDiverged { epoch } => CliError::Numeric(format!(
                "training diverged (non-finite loss) at epoch {epoch}"
            )),
        }
    }
}
