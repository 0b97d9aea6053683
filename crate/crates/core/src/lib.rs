//! Gravity-compensation-first force allocation.
//!
//! The desired force is split as `f_d = -f_g + f_t`: a gravity-compensation
//! component `f_g` that is satisfied first and a tracking component `f_t` that
//! uses whatever authority remains inside the feasible force set `F`.

pub mod alloc;
pub mod disturbance;
pub mod error;
pub mod feasible;
pub mod horizon;
pub mod math;
mod tolerances;

pub use alloc::{
    desired_acceleration, solve_lexicographic, solve_weighted, solve_weighted_disturbed,
    AllocProblem, Allocation, PdGains, PriorityWeights, Targets,
};
pub use disturbance::decompose_disturbance;
pub use error::{CoreError, Result};
pub use feasible::FeasibleSet;
pub use horizon::{
    energy_cost, horizon_cost, impulse_cost, mpc_step, solve_horizon, CostTerms, DescentTrajectory,
    Grid, HeightGrid, HorizonController, HorizonGrid, HorizonProblem, HorizonSolution,
    HorizonWeights, MpcStep, ScheduleCost,
};
pub use math::{
    gravity, quat_to_rotation, FrameConvention, Mat3, Quaternion, Rotation, Vec3, WindAngles,
};
pub use tolerances::{Tolerances, TOL};
