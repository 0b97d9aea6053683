//! Numerical tolerances and iteration budgets shared by every solver.

/// One record holding every threshold the library relies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum deviation of a quaternion norm from 1 after normalization.
    pub quat_norm: f64,
    /// A quaternion further than this from unit norm is renormalized and flagged.
    pub quat_flag: f64,
    /// Membership slack for feasible-set checks.
    pub feasibility: f64,
    /// Convergence tolerance of the intersection projection.
    pub intersection: f64,
    /// Iteration cap of the intersection projection.
    pub intersection_iters: usize,
    /// Bisection steps used for slice and support computations.
    pub bisection_iters: usize,
    /// Default iteration cap of the horizon solver.
    pub horizon_iters: usize,
    /// Relative objective change below which the horizon solver stops.
    pub horizon_rel: f64,
    /// Fixed-point residual (scaled by the Lipschitz constant) below which the
    /// horizon solver stops.
    pub horizon_fixed_point: f64,
    /// Smallest admissible gravity norm for disturbance decomposition.
    pub min_gravity: f64,
}

pub const TOL: Tolerances = Tolerances {
    quat_norm: 1e-9,
    quat_flag: 1e-6,
    feasibility: 1e-9,
    intersection: 1e-10,
    intersection_iters: 200,
    bisection_iters: 200,
    horizon_iters: 5000,
    horizon_rel: 1e-15,
    horizon_fixed_point: 1e-11,
    min_gravity: 1e-12,
};
