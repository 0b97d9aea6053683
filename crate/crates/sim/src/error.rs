use gcf_core::CoreError;
use gcf_vehicles::VehicleError;
use thiserror::Error;

use crate::runner::SimLog;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("log has no records")]
    EmptyLog,
    /// The plant integration failed; `log` holds every step up to the failure.
    #[error("integration failed at step {step} (t = {time} s): {source}")]
    Integration {
        step: usize,
        time: f64,
        source: VehicleError,
        log: Box<SimLog>,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;
