use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
    #[error("feasible set is empty (residual {residual:.3e} after {iterations} iterations)")]
    InfeasibleSet { residual: f64, iterations: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("heights are not strictly increasing at sample {index}")]
    NonMonotoneHeight { index: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;
