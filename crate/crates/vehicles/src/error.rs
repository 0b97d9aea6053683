use gcf_core::CoreError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VehicleError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite state derivative at RK4 stage {stage}")]
    NonFinite { stage: usize },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, VehicleError>;
