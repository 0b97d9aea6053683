use std::process::ExitCode;

use gcf_core::CoreError;
use gcf_sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed flags, unreadable or invalid configuration, unwritable output.
    #[error("{0}")]
    Usage(String),
    #[error("infeasible set: {0}")]
    Infeasible(CoreError),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Integration(_) => 4,
            CliError::NotConverged { .. } => 5,
        })
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidSet(_) | CoreError::InfeasibleSet { .. } => CliError::Infeasible(e),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Core(c) => c.into(),
            SimError::Integration { .. } => CliError::Integration(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
