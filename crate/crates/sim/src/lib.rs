//! Closed-loop simulation of quadcopter and fixed-wing descents under
//! gravity-compensation-first control.

pub mod bundled;
pub mod config;
pub mod error;
pub mod metrics;
pub mod reference;
pub mod runner;

pub use bundled::{bundled, BUNDLED};
pub use config::{
    AllocMode, ControllerSpec, FaultSpec, HorizonConfig, ScenarioConfig, VehicleSpec, Viewpoint,
    CONFIG_VERSION,
};
pub use error::{Result, SimError};
pub use gcf_vehicles::rk4_step;
pub use metrics::{compute_metrics, MetricsSummary};
pub use reference::Reference;
pub use runner::{
    run_scenario, ControllerEvent, EventKind, SimLog, StepRecord, Termination, Touchdown,
};
