//! Single-instant gravity-compensation-first force allocation.
//!
//! The commanded force is split as `f_d = -f_g + f_t`, where `f_g` tracks the
//! gravity target `m g` (plus the gravity-aligned part of any disturbance)
//! and `f_t` tracks the trajectory target `m a_d` (minus the orthogonal part
//! of the disturbance). Two solvers are offered:
//!
//! * [`solve_lexicographic`] satisfies the gravity term first and spends the
//!   remaining authority on tracking. Tracking itself is resolved along the
//!   gravity axis before the lateral plane, so lateral demand never eats into
//!   the vertical force left for holding altitude.
//! * [`solve_weighted`] minimises `w_g‖f_g - m g‖² + w_t‖f_t - m a_d‖²`
//!   subject to `f_d ∈ F` in closed form.

use serde::{Deserialize, Serialize};

use crate::disturbance::decompose_disturbance;
use crate::error::{CoreError, Result};
use crate::feasible::FeasibleSet;
use crate::math::{check_finite, Vec3};

/// Position and velocity feedback gains for the desired acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl PdGains {
    pub fn new(kp: f64, kd: f64) -> Result<Self> {
        let gains = Self { kp, kd };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kp > 0.0 && self.kd > 0.0 && self.kp.is_finite() && self.kd.is_finite() {
            Ok(())
        } else {
            Err(CoreError::InvalidProblem(format!(
                "PD gains must be positive, got kp={} kd={}",
                self.kp, self.kd
            )))
        }
    }
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 4.0, kd: 4.0 }
    }
}

/// `a_d = -kp (p - p_d) - kd (v - ṗ_d)`.
pub fn desired_acceleration(
    p: &Vec3,
    v: &Vec3,
    p_d: &Vec3,
    p_d_dot: &Vec3,
    gains: &PdGains,
) -> Vec3 {
    -gains.kp * (p - p_d) - gains.kd * (v - p_d_dot)
}

/// Relative weights of the gravity and tracking objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityWeights {
    pub gravity: f64,
    pub tracking: f64,
}

impl Default for PriorityWeights {
    fn default() -> Self {
        Self {
            gravity: 1e4,
            tracking: 1e2,
        }
    }
}

impl PriorityWeights {
    pub fn validate(&self) -> Result<()> {
        if self.gravity > self.tracking && self.tracking > 0.0 && self.gravity.is_finite() {
            Ok(())
        } else {
            Err(CoreError::InvalidProblem(format!(
                "weights must satisfy w_g > w_t > 0, got w_g={} w_t={}",
                self.gravity, self.tracking
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocProblem {
    pub mass: f64,
    pub gravity: Vec3,
    pub accel_desired: Vec3,
    pub set: FeasibleSet,
    pub weights: PriorityWeights,
    /// Estimated external force acting on the vehicle, N.
    pub disturbance: Option<Vec3>,
}

/// The two force targets after folding in the disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    /// `m g + d_g`
    pub gravity: Vec3,
    /// `m a_d - (d - d_g)`
    pub tracking: Vec3,
}

impl AllocProblem {
    pub fn new(mass: f64, gravity: Vec3, accel_desired: Vec3, set: FeasibleSet) -> Self {
        Self {
            mass,
            gravity,
            accel_desired,
            set,
            weights: PriorityWeights::default(),
            disturbance: None,
        }
    }

    pub fn with_weights(mut self, weights: PriorityWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_disturbance(mut self, d: Vec3) -> Self {
        self.disturbance = Some(d);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(CoreError::InvalidProblem(format!(
                "mass {} must be positive",
                self.mass
            )));
        }
        check_finite("gravity", &self.gravity)?;
        check_finite("desired acceleration", &self.accel_desired)?;
        if let Some(d) = &self.disturbance {
            check_finite("disturbance", d)?;
        }
        if self.gravity.norm() == 0.0 {
            return Err(CoreError::Domain("gravity vector has zero length".into()));
        }
        self.set.validate()
    }

    pub fn targets(&self) -> Result<Targets> {
        let mg = self.mass * self.gravity;
        let mad = self.mass * self.accel_desired;
        match &self.disturbance {
            None => Ok(Targets {
                gravity: mg,
                tracking: mad,
            }),
            Some(d) => {
                let (along, across) = decompose_disturbance(d, &self.gravity)?;
                Ok(Targets {
                    gravity: mg + along,
                    tracking: mad - across,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Allocation {
    pub f_g_star: Vec3,
    pub f_t_star: Vec3,
    pub f_d: Vec3,
}

impl Allocation {
    /// Builds the allocation with `f_d = -f_g + f_t`.
    pub fn synthesize(f_g: Vec3, f_t: Vec3) -> Self {
        Self {
            f_g_star: f_g,
            f_t_star: f_t,
            f_d: -f_g + f_t,
        }
    }

    pub fn gravity_residual(&self, targets: &Targets) -> f64 {
        (self.f_g_star - targets.gravity).norm()
    }

    pub fn tracking_residual(&self, targets: &Targets) -> f64 {
        (self.f_t_star - targets.tracking).norm()
    }

    pub fn weighted_objective(&self, targets: &Targets, weights: &PriorityWeights) -> f64 {
        weights.gravity * (self.f_g_star - targets.gravity).norm_squared()
            + weights.tracking * (self.f_t_star - targets.tracking).norm_squared()
    }
}

/// Strict-priority allocation.
///
/// 1. `f_g*` is the point of `-F` nearest the gravity target, so that `-f_g*`
///    is an achievable force.
/// 2. `f_t*` is chosen with `-f_g* + f_t* ∈ F`: first the component of the
///    tracking error along gravity is minimised, then the full error within
///    that slice of `F`.
pub fn solve_lexicographic(prob: &AllocProblem) -> Result<Allocation> {
    prob.validate()?;
    let targets = prob.targets()?;
    let f_g = -prob.set.project(&-targets.gravity)?;

    let axis = prob.gravity.normalize();
    let wanted = targets.tracking - f_g;
    let (lo, hi) = prob.set.axial_range(&axis)?;
    let level = axis.dot(&wanted).clamp(lo, hi);
    let f_d = prob.set.project_on_slice(&axis, level, &wanted)?;
    Ok(Allocation::synthesize(f_g, f_g + f_d))
}

/// Weighted single-problem allocation.
///
/// With `u = -f_g + f_t` and `f_g` free, minimising over `f_g` first leaves
/// `(w_g w_t / (w_g + w_t)) ‖u - (t_t - t_g)‖²`, so `u` is the projection of
/// the unconstrained command onto `F` and the residual is shared between the
/// two terms in inverse proportion to their weights.
pub fn solve_weighted(prob: &AllocProblem) -> Result<Allocation> {
    prob.validate()?;
    prob.weights.validate()?;
    let targets = prob.targets()?;
    weighted_with_targets(&prob.set, &prob.weights, &targets)
}

/// [`solve_weighted`] with the disturbance folded into the targets. The
/// problem must carry a disturbance estimate.
pub fn solve_weighted_disturbed(prob: &AllocProblem) -> Result<Allocation> {
    if prob.disturbance.is_none() {
        return Err(CoreError::InvalidProblem(
            "disturbed allocation requires a disturbance estimate".into(),
        ));
    }
    solve_weighted(prob)
}

fn weighted_with_targets(
    set: &FeasibleSet,
    weights: &PriorityWeights,
    targets: &Targets,
) -> Result<Allocation> {
    let wanted = targets.tracking - targets.gravity;
    let u = set.project(&wanted)?;
    let shortfall = wanted - u;
    let total = weights.gravity + weights.tracking;
    let f_g = targets.gravity + (weights.tracking / total) * shortfall;
    let f_t = targets.tracking - (weights.gravity / total) * shortfall;
    Ok(Allocation::synthesize(f_g, f_t))
}
