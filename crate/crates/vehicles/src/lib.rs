//! Rigid-body vehicle models and the shooting MPC that drives them.

pub mod error;
pub mod fixedwing;
pub mod mpc;
pub mod quad;
pub mod state;
pub mod trim;

pub use error::{Result, VehicleError};
pub use fixedwing::{
    aero_wrench, airflow_state, downwash_speed, fw_derivative, fw_wrench, propeller_wrench,
    AeroCoeffTable, AirflowState, FwParams, SurfaceCommand, WingLossFault,
};
pub use mpc::{
    fw_gcf_mpc, quad_gcf_mpc, solve_shooting, FwMpc, FwPlant, MpcSettings, QuadMpc, QuadPlant,
    ShootingInput, ShootingMpc, ShootingPlant, ShootingResult,
};
pub use quad::{
    apply_motor_fault, mixer_forward, mixer_inverse, quad_derivative, ForceTracker, MotorFault,
    QuadParams, ThrustCommand,
};
pub use state::{rk4_step, RigidBodyState, StateDerivative};
pub use trim::{find_trim, TrimPoint};
