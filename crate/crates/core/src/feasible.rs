//! Convex feasible force sets and their Euclidean projections.
//!
//! Balls are centred at the origin. Boxes are axis-aligned. Intersections are
//! projected with Dykstra's alternating-projection scheme, which converges to
//! the exact projection rather than merely to some common point.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::math::{check_finite, Vec3};
use crate::tolerances::TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeasibleSet {
    Ball { radius: f64 },
    Box { lo: Vec3, hi: Vec3 },
    Intersection { sets: Vec<FeasibleSet> },
}

impl FeasibleSet {
    pub fn ball(radius: f64) -> Self {
        Self::Ball { radius }
    }

    pub fn cube(lo: Vec3, hi: Vec3) -> Self {
        Self::Box { lo, hi }
    }

    pub fn intersection(sets: Vec<FeasibleSet>) -> Self {
        Self::Intersection { sets }
    }

    /// Checks the structural invariants. Emptiness of an intersection is only
    /// discovered when projecting.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Ball { radius } => {
                if radius.is_finite() && *radius > 0.0 {
                    Ok(())
                } else {
                    Err(CoreError::InvalidSet(format!(
                        "ball radius {radius} must be positive"
                    )))
                }
            }
            Self::Box { lo, hi } => {
                check_finite("box lower corner", lo)
                    .and_then(|_| check_finite("box upper corner", hi))
                    .map_err(|e| CoreError::InvalidSet(e.to_string()))?;
                if lo.iter().zip(hi.iter()).all(|(l, h)| l <= h) {
                    Ok(())
                } else {
                    Err(CoreError::InvalidSet(format!(
                        "box corners out of order: lo {lo:?} hi {hi:?}"
                    )))
                }
            }
            Self::Intersection { sets } => {
                if sets.is_empty() {
                    return Err(CoreError::InvalidSet("intersection of zero sets".into()));
                }
                sets.iter().try_for_each(Self::validate)
            }
        }
    }

    /// Point reflection `{-x : x ∈ self}`.
    pub fn negated(&self) -> Self {
        match self {
            Self::Ball { radius } => Self::Ball { radius: *radius },
            Self::Box { lo, hi } => Self::Box { lo: -hi, hi: -lo },
            Self::Intersection { sets } => Self::Intersection {
                sets: sets.iter().map(Self::negated).collect(),
            },
        }
    }

    /// Largest distance from `x` to any primitive member of the set.
    pub fn violation(&self, x: &Vec3) -> f64 {
        match self {
            Self::Ball { radius } => (x.norm() - radius).max(0.0),
            Self::Box { lo, hi } => {
                let below = lo - x;
                let above = x - hi;
                below.sup(&above).sup(&Vec3::zeros()).norm()
            }
            Self::Intersection { sets } => sets.iter().map(|s| s.violation(x)).fold(0.0, f64::max),
        }
    }

    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &Vec3) -> Result<Vec3> {
        self.validate()?;
        check_finite("projection input", x)?;
        self.project_unchecked(x)
    }

    fn project_unchecked(&self, x: &Vec3) -> Result<Vec3> {
        match self {
            Self::Ball { radius } => Ok(project_ball(*radius, x)),
            Self::Box { lo, hi } => Ok(x.sup(lo).inf(hi)),
            Self::Intersection { .. } => {
                let members = self.primitives();
                dykstra(&members, None, x)
            }
        }
    }

    /// Flattened list of non-intersection members.
    fn primitives(&self) -> Vec<&FeasibleSet> {
        match self {
            Self::Intersection { sets } => sets.iter().flat_map(|s| s.primitives()).collect(),
            other => vec![other],
        }
    }

    /// Range of `dirᵀx` over the set, for a unit vector `dir`.
    pub fn axial_range(&self, dir: &Vec3) -> Result<(f64, f64)> {
        self.validate()?;
        match self {
            Self::Ball { radius } => Ok((-radius, *radius)),
            Self::Box { lo, hi } => Ok(box_support(lo, hi, dir)),
            Self::Intersection { .. } => {
                let members = self.primitives();
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for m in &members {
                    let (a, b) = m.axial_range(dir)?;
                    lo = lo.max(a);
                    hi = hi.min(b);
                }
                if lo > hi {
                    return Err(CoreError::InfeasibleSet {
                        residual: lo - hi,
                        iterations: 0,
                    });
                }
                // Shrink the outer bounds onto the true support by bisection
                // on slice feasibility.
                let feasible = |s: f64| slice_feasible(&members, dir, s);
                let mid = 0.5 * (lo + hi);
                let anchor = [mid, lo, hi]
                    .into_iter()
                    .find(|&s| feasible(s))
                    .or_else(|| {
                        let x = dykstra(&members, None, &Vec3::zeros()).ok()?;
                        Some(dir.dot(&x))
                    })
                    .ok_or(CoreError::InfeasibleSet {
                        residual: f64::NAN,
                        iterations: TOL.intersection_iters,
                    })?;
                let upper = if feasible(hi) {
                    hi
                } else {
                    bisect_boundary(anchor, hi, &feasible)
                };
                let lower = if feasible(lo) {
                    lo
                } else {
                    bisect_boundary(anchor, lo, &feasible)
                };
                Ok((lower, upper))
            }
        }
    }

    /// Nearest point to `y` within the slice `{x ∈ set : dirᵀx = level}`.
    /// `dir` must be a unit vector and `level` inside [`Self::axial_range`].
    pub fn project_on_slice(&self, dir: &Vec3, level: f64, y: &Vec3) -> Result<Vec3> {
        self.validate()?;
        check_finite("slice target", y)?;
        match self {
            Self::Ball { radius } => {
                let centre = level * dir;
                let lateral = y - dir.dot(y) * dir;
                let rho = (radius * radius - level * level).max(0.0).sqrt();
                let n = lateral.norm();
                Ok(if n <= rho {
                    centre + lateral
                } else {
                    centre + lateral * (rho / n)
                })
            }
            Self::Box { lo, hi } => Ok(box_slice(lo, hi, dir, level, y)),
            Self::Intersection { .. } => {
                let members = self.primitives();
                dykstra(&members, Some((dir, level)), y)
            }
        }
    }
}

fn project_ball(radius: f64, x: &Vec3) -> Vec3 {
    let n = x.norm();
    if n <= radius {
        *x
    } else {
        x * (radius / n)
    }
}

fn project_plane(dir: &Vec3, level: f64, x: &Vec3) -> Vec3 {
    x - (dir.dot(x) - level) * dir
}

fn box_support(lo: &Vec3, hi: &Vec3, dir: &Vec3) -> (f64, f64) {
    let mut min = 0.0;
    let mut max = 0.0;
    for i in 0..3 {
        let a = dir[i] * lo[i];
        let b = dir[i] * hi[i];
        min += a.min(b);
        max += a.max(b);
    }
    (min, max)
}

/// Projection onto a box cut by a hyperplane. The minimiser has the form
/// `clamp(y - λ dir)`; `λ` is found by bisection on the monotone map
/// `λ ↦ dirᵀ clamp(y - λ dir)`.
fn box_slice(lo: &Vec3, hi: &Vec3, dir: &Vec3, level: f64, y: &Vec3) -> Vec3 {
    let active: Vec<usize> = (0..3).filter(|&i| dir[i] != 0.0).collect();
    if let [axis] = active[..] {
        let mut x = y.sup(lo).inf(hi);
        x[axis] = (level / dir[axis]).clamp(lo[axis], hi[axis]);
        return x;
    }
    let at = |lambda: f64| (y - lambda * dir).sup(lo).inf(hi);
    let phi = |lambda: f64| dir.dot(&at(lambda));
    let span = active
        .iter()
        .map(|&i| ((y[i] - lo[i]).abs() + (y[i] - hi[i]).abs()) / dir[i].abs())
        .fold(0.0, f64::max)
        + 1.0;
    let (mut a, mut b) = (-span, span);
    for _ in 0..TOL.bisection_iters {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if phi(m) > level {
            a = m;
        } else {
            b = m;
        }
    }
    at(0.5 * (a + b))
}

fn slice_feasible(members: &[&FeasibleSet], dir: &Vec3, level: f64) -> bool {
    match dykstra(members, Some((dir, level)), &(level * dir)) {
        Ok(x) => {
            members.iter().all(|m| m.violation(&x) <= 1e-8) && (dir.dot(&x) - level).abs() <= 1e-8
        }
        Err(_) => false,
    }
}

fn bisect_boundary(mut inside: f64, mut outside: f64, feasible: &dyn Fn(f64) -> bool) -> f64 {
    for _ in 0..100 {
        let m = 0.5 * (inside + outside);
        if (outside - inside).abs() <= 1e-12 * (1.0 + m.abs()) {
            break;
        }
        if feasible(m) {
            inside = m;
        } else {
            outside = m;
        }
    }
    inside
}

/// Dykstra's algorithm over the primitive members, optionally with one extra
/// hyperplane constraint.
fn dykstra(members: &[&FeasibleSet], plane: Option<(&Vec3, f64)>, y: &Vec3) -> Result<Vec3> {
    let count = members.len() + usize::from(plane.is_some());
    let project = |k: usize, z: &Vec3| -> Vec3 {
        if k < members.len() {
            match members[k] {
                FeasibleSet::Ball { radius } => project_ball(*radius, z),
                FeasibleSet::Box { lo, hi } => z.sup(lo).inf(hi),
                FeasibleSet::Intersection { .. } => unreachable!("members are flattened"),
            }
        } else {
            let (dir, level) = plane.expect("plane present");
            project_plane(dir, level, z)
        }
    };
    let violation = |x: &Vec3| -> f64 {
        let mut v = members.iter().map(|m| m.violation(x)).fold(0.0, f64::max);
        if let Some((dir, level)) = plane {
            v = v.max((dir.dot(x) - level).abs());
        }
        v
    };

    let mut x = *y;
    let mut increments = vec![Vec3::zeros(); count];
    let scale = 1.0 + y.norm();
    for _ in 0..TOL.intersection_iters {
        let start = x;
        for (k, inc) in increments.iter_mut().enumerate() {
            let z = x + *inc;
            x = project(k, &z);
            *inc = z - x;
        }
        if (x - start).norm() <= TOL.intersection * scale
            && violation(&x) <= TOL.intersection * scale
        {
            return Ok(x);
        }
    }
    let residual = violation(&x);
    if residual <= 1e-6 * scale {
        Ok(x)
    } else {
        Err(CoreError::InfeasibleSet {
            residual,
            iterations: TOL.intersection_iters,
        })
    }
}
