use gcf_core::{Quaternion, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VehicleError};

/// Position and velocity in the earth frame, attitude, body angular rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBodyState {
    pub p: Vec3,
    pub v: Vec3,
    pub q: Quaternion,
    pub omega: Vec3,
}

impl Default for RigidBodyState {
    fn default() -> Self {
        Self {
            p: Vec3::zeros(),
            v: Vec3::zeros(),
            q: Quaternion::identity(),
            omega: Vec3::zeros(),
        }
    }
}

impl RigidBodyState {
    pub fn at_rest(p: Vec3) -> Self {
        Self {
            p,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        gcf_core::math::is_finite(&self.p)
            && gcf_core::math::is_finite(&self.v)
            && self.q.is_finite()
            && gcf_core::math::is_finite(&self.omega)
    }

    fn advanced(&self, d: &StateDerivative, h: f64) -> Self {
        Self {
            p: self.p + h * d.dp,
            v: self.v + h * d.dv,
            q: Quaternion::new(
                self.q.w + h * d.dq[0],
                self.q.x + h * d.dq[1],
                self.q.y + h * d.dq[2],
                self.q.z + h * d.dq[3],
            ),
            omega: self.omega + h * d.domega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dp: Vec3,
    pub dv: Vec3,
    pub dq: [f64; 4],
    pub domega: Vec3,
}

impl StateDerivative {
    pub fn is_finite(&self) -> bool {
        gcf_core::math::is_finite(&self.dp)
            && gcf_core::math::is_finite(&self.dv)
            && self.dq.iter().all(|x| x.is_finite())
            && gcf_core::math::is_finite(&self.domega)
    }
}

/// Rigid-body kinematics shared by every vehicle: `ṗ = v`, quaternion
/// kinematics, and Euler's equation with the given applied torque.
pub fn rigid_body_derivative(
    s: &RigidBodyState,
    accel: Vec3,
    inertia: &gcf_core::Mat3,
    inertia_inv: &gcf_core::Mat3,
    torque: Vec3,
) -> StateDerivative {
    let jw = inertia * s.omega;
    StateDerivative {
        dp: s.v,
        dv: accel,
        dq: s.q.kinematics(&s.omega),
        domega: inertia_inv * (-s.omega.cross(&jw) + torque),
    }
}

/// One classical fourth-order Runge-Kutta step of length `dt`, followed by
/// quaternion renormalization.
pub fn rk4_step<F>(state: &RigidBodyState, f: F, dt: f64) -> Result<RigidBodyState>
where
    F: Fn(&RigidBodyState) -> StateDerivative,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(VehicleError::InvalidParams(format!(
            "step {dt} must be positive"
        )));
    }
    let stage = |k: StateDerivative, index: usize| {
        if k.is_finite() {
            Ok(k)
        } else {
            Err(VehicleError::NonFinite { stage: index })
        }
    };
    let k1 = stage(f(state), 1)?;
    let k2 = stage(f(&state.advanced(&k1, 0.5 * dt)), 2)?;
    let k3 = stage(f(&state.advanced(&k2, 0.5 * dt)), 3)?;
    let k4 = stage(f(&state.advanced(&k3, dt)), 4)?;
    let combined = StateDerivative {
        dp: (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp) / 6.0,
        dv: (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv) / 6.0,
        dq: std::array::from_fn(|i| (k1.dq[i] + 2.0 * k2.dq[i] + 2.0 * k3.dq[i] + k4.dq[i]) / 6.0),
        domega: (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega) / 6.0,
    };
    let mut next = state.advanced(&combined, dt);
    next.q = next.q.normalized();
    if !next.is_finite() {
        return Err(VehicleError::NonFinite { stage: 0 });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gcf_core::{gravity, Mat3};

    fn ballistic(s: &RigidBodyState) -> StateDerivative {
        rigid_body_derivative(
            s,
            gravity(),
            &Mat3::identity(),
            &Mat3::identity(),
            Vec3::zeros(),
        )
    }

    #[test]
    fn free_fall_one_second() {
        let mut s = RigidBodyState::default();
        for _ in 0..100 {
            s = rk4_step(&s, ballistic, 0.01).unwrap();
        }
        assert!((s.p.z - 4.9).abs() < 1e-6);
        assert!((s.v.z - 9.8).abs() < 1e-9);
    }

    #[test]
    fn constant_velocity_advances_exactly() {
        let s = RigidBodyState {
            v: Vec3::new(1.0, -2.0, 0.5),
            ..RigidBodyState::default()
        };
        let f = |s: &RigidBodyState| {
            rigid_body_derivative(
                s,
                Vec3::zeros(),
                &Mat3::identity(),
                &Mat3::identity(),
                Vec3::zeros(),
            )
        };
        let next = rk4_step(&s, f, 0.25).unwrap();
        assert_eq!(next.p, Vec3::new(0.25, -0.5, 0.125));
    }

    #[test]
    fn linear_system_error_is_fifth_order() {
        // ṗ = v, v̇ = -p along x: a harmonic oscillator with exp(At) known.
        let f = |s: &RigidBodyState| {
            rigid_body_derivative(
                s,
                Vec3::new(-s.p.x, 0.0, 0.0),
                &Mat3::identity(),
                &Mat3::identity(),
                Vec3::zeros(),
            )
        };
        let s0 = RigidBodyState::at_rest(Vec3::new(1.0, 0.0, 0.0));
        let mut errs = Vec::new();
        for dt in [0.1, 0.05] {
            let s = rk4_step(&s0, f, dt).unwrap();
            let exact = f64::cos(dt);
            errs.push((s.p.x - exact).abs());
            assert!((s.p.x - exact).abs() <= dt.powi(5));
        }
        // Halving the step cuts the local error by about 2⁵.
        assert!(errs[0] / errs[1] > 20.0);
    }

    #[test]
    fn quaternion_stays_unit() {
        let s = RigidBodyState {
            omega: Vec3::new(3.0, -1.0, 2.0),
            ..RigidBodyState::default()
        };
        let mut x = s;
        for _ in 0..500 {
            x = rk4_step(&x, ballistic, 0.01).unwrap();
            assert!((x.q.norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let bad = |s: &RigidBodyState| {
            let mut d = ballistic(s);
            d.dv.x = f64::NAN;
            d
        };
        assert!(matches!(
            rk4_step(&RigidBodyState::default(), bad, 0.01),
            Err(VehicleError::NonFinite { stage: 1 })
        ));
        assert!(rk4_step(&RigidBodyState::default(), ballistic, 0.0).is_err());
    }
}
