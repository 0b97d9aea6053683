//! X-configuration quadcopter: thrust mixer, rigid-body model, motor faults.

use gcf_core::{gravity, Mat3, Vec3};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VehicleError};
use crate::state::{rigid_body_derivative, RigidBodyState, StateDerivative};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadParams {
    pub mass: f64,
    pub inertia: Mat3,
    /// Distance from the body centre to each motor, m.
    pub arm: f64,
    /// `c_M / c_T`.
    pub torque_ratio: f64,
    /// Per-motor thrust limit, N.
    pub max_thrust: f64,
    /// Constant gyroscopic torque, N·m.
    #[serde(default = "Vec3::zeros")]
    pub gyro: Vec3,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: Mat3::from_diagonal(&Vec3::new(0.01, 0.01, 0.02)),
            arm: 0.2,
            torque_ratio: 0.02,
            max_thrust: 6.0,
            gyro: Vec3::zeros(),
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(VehicleError::InvalidParams(format!(
                    "{name} must be positive, got {x}"
                )))
            }
        };
        positive("mass", self.mass)?;
        positive("arm", self.arm)?;
        positive("torque_ratio", self.torque_ratio)?;
        positive("max_thrust", self.max_thrust)?;
        check_inertia(&self.inertia)?;
        if !gcf_core::math::is_finite(&self.gyro) {
            return Err(VehicleError::InvalidParams(
                "gyro torque must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn inertia_inverse(&self) -> Mat3 {
        self.inertia.try_inverse().unwrap_or_else(Mat3::zeros)
    }

    /// Per-motor thrust for a level hover.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * gravity().z / 4.0
    }
}

pub(crate) fn check_inertia(j: &Mat3) -> Result<()> {
    if (j - j.transpose()).amax() > 1e-12 * j.amax() || j.cholesky().is_none() {
        Err(VehicleError::InvalidParams(
            "inertia must be symmetric positive definite".into(),
        ))
    } else {
        Ok(())
    }
}

/// Motor thrusts `T1..T4`, N.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThrustCommand(pub [f64; 4]);

impl ThrustCommand {
    pub fn uniform(t: f64) -> Self {
        Self([t; 4])
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn clamped(&self, max: f64) -> Self {
        Self(self.0.map(|t| t.clamp(0.0, max)))
    }

    pub fn within(&self, max: f64) -> bool {
        self.0.iter().all(|t| (0.0..=max).contains(t))
    }
}

/// Complete loss of one motor from `onset` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorFault {
    /// 1-based motor index.
    pub motor: usize,
    pub onset: f64,
}

impl MotorFault {
    pub fn validate(&self) -> Result<()> {
        if (1..=4).contains(&self.motor) && self.onset.is_finite() {
            Ok(())
        } else {
            Err(VehicleError::InvalidParams(format!(
                "motor index {} outside 1..=4",
                self.motor
            )))
        }
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.onset
    }
}

/// `[f, τx, τy, τz]ᵀ = H [T1..T4]ᵀ`.
pub fn mixer_matrix(params: &QuadParams) -> Matrix4<f64> {
    let a = std::f64::consts::FRAC_1_SQRT_2 * params.arm;
    let k = params.torque_ratio;
    Matrix4::new(
        1.0, 1.0, 1.0, 1.0, //
        a, -a, a, -a, //
        a, a, -a, -a, //
        k, -k, k, -k,
    )
}

/// Total thrust and body torque produced by `cmd`.
pub fn mixer_forward(cmd: &ThrustCommand, params: &QuadParams) -> (f64, Vec3) {
    let w = mixer_matrix(params) * Vector4::from(cmd.0);
    (w[0], Vec3::new(w[1], w[2], w[3]))
}

/// Minimum-norm thrusts reproducing `(f, τ)` as closely as the mixer allows.
/// The roll and yaw rows of `H` are parallel, so only the components of `τ`
/// consistent with that coupling are reproduced exactly.
pub fn mixer_inverse(f: f64, tau: &Vec3, params: &QuadParams) -> ThrustCommand {
    let pinv = mixer_matrix(params)
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse of a finite matrix");
    let t = pinv * Vector4::new(f, tau.x, tau.y, tau.z);
    ThrustCommand([t[0], t[1], t[2], t[3]])
}

/// Box-constrained least squares `min ‖H T - w‖²` with `T_i ∈ [0, T_m]` and
/// the motors in `pinned` held at zero. Every face of the box is tried (each
/// motor at zero, at its limit, or free); among the best residuals the
/// smallest thrust vector wins.
pub fn allocate_thrust(
    f: f64,
    tau: &Vec3,
    params: &QuadParams,
    pinned: [bool; 4],
) -> ThrustCommand {
    let h = mixer_matrix(params);
    let w = Vector4::new(f, tau.x, tau.y, tau.z);
    let tm = params.max_thrust;
    let scale = 1.0 + w.norm();
    let mut best: Option<(f64, f64, Vector4<f64>)> = None;
    for code in 0..81usize {
        // Per motor: 0 at zero, 1 at the limit, 2 free.
        let mode: [usize; 4] = std::array::from_fn(|i| (code / 3usize.pow(i as u32)) % 3);
        if (0..4).any(|i| pinned[i] && mode[i] != 0) {
            continue;
        }
        let fixed = Vector4::from_fn(|i, _| if mode[i] == 1 { tm } else { 0.0 });
        let mut free_cols = h;
        for (i, m) in mode.iter().enumerate() {
            if *m != 2 {
                free_cols.set_column(i, &Vector4::zeros());
            }
        }
        let Ok(pinv) = free_cols.pseudo_inverse(1e-12) else {
            continue;
        };
        let t = fixed + pinv * (w - h * fixed);
        if (0..4).any(|i| t[i] < -1e-12 || t[i] > tm + 1e-12) {
            continue;
        }
        let t = Vector4::from_fn(|i, _| t[i].clamp(0.0, tm));
        let res = (h * t - w).norm();
        let better = match &best {
            None => true,
            Some((r, n, _)) => {
                res < r - 1e-12 * scale || (res <= r + 1e-12 * scale && t.norm() < *n)
            }
        };
        if better {
            best = Some((res, t.norm(), t));
        }
    }
    let t = best.map(|b| b.2).unwrap_or_else(Vector4::zeros);
    ThrustCommand([t[0], t[1], t[2], t[3]])
}

/// Realizes an earth-frame force with thrust along the current body axis and
/// a reduced-attitude loop that turns that axis toward the force. Yaw is left
/// free; the yaw torque requested is the one the roll channel carries along.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForceTracker {
    /// Attitude loop natural frequency, rad/s.
    pub natural_freq: f64,
    pub damping: f64,
}

impl Default for ForceTracker {
    fn default() -> Self {
        Self {
            natural_freq: 20.0,
            damping: 0.9,
        }
    }
}

impl ForceTracker {
    pub fn command(
        &self,
        s: &RigidBodyState,
        target: &Vec3,
        params: &QuadParams,
        pinned: [bool; 4],
    ) -> ThrustCommand {
        let rot = s.q.rotation();
        let b3 = rot.column(2).into_owned();
        let magnitude = target.norm();
        if magnitude <= 1e-12 {
            return allocate_thrust(0.0, &Vec3::zeros(), params, pinned);
        }
        let b3_d = -target / magnitude;
        let f = (-target.dot(&b3)).max(0.0);
        let axis = b3.cross(&b3_d);
        let (sin, cos) = (axis.norm(), b3.dot(&b3_d));
        let error = if sin > 1e-12 {
            rot.transpose() * axis * (sin.atan2(cos) / sin)
        } else if cos < 0.0 {
            Vec3::new(std::f64::consts::PI, 0.0, 0.0)
        } else {
            Vec3::zeros()
        };
        let wn = self.natural_freq;
        let mut accel = wn * wn * error - 2.0 * self.damping * wn * s.omega;
        accel.z = 0.0;
        let mut tau = params.inertia * accel + s.omega.cross(&(params.inertia * s.omega));
        tau.z = tau.x * params.torque_ratio / (std::f64::consts::FRAC_1_SQRT_2 * params.arm);
        allocate_thrust(f, &tau, params, pinned)
    }
}

/// Earth-frame thrust force `-f R(q) e₃`.
pub fn quad_force(s: &RigidBodyState, cmd: &ThrustCommand) -> Vec3 {
    -cmd.total() * s.q.rotation().column(2).into_owned()
}

pub fn quad_derivative(
    s: &RigidBodyState,
    cmd: &ThrustCommand,
    params: &QuadParams,
) -> StateDerivative {
    quad_derivative_with(s, cmd, params, &params.inertia_inverse())
}

/// [`quad_derivative`] with a precomputed `J⁻¹`.
pub fn quad_derivative_with(
    s: &RigidBodyState,
    cmd: &ThrustCommand,
    params: &QuadParams,
    inertia_inv: &Mat3,
) -> StateDerivative {
    let (f, tau) = mixer_forward(cmd, params);
    let accel = gravity() - (f / params.mass) * s.q.rotation().column(2).into_owned();
    rigid_body_derivative(s, accel, &params.inertia, inertia_inv, params.gyro + tau)
}

/// Zeroes the failed motor once the fault is active (`t ≥ onset`).
pub fn apply_motor_fault(cmd: &ThrustCommand, fault: &MotorFault, t: f64) -> ThrustCommand {
    let mut out = *cmd;
    if fault.active(t) && (1..=4).contains(&fault.motor) {
        out.0[fault.motor - 1] = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::rk4_step;
    use gcf_core::Quaternion;

    fn params(arm: f64, ratio: f64) -> QuadParams {
        QuadParams {
            arm,
            torque_ratio: ratio,
            ..QuadParams::default()
        }
    }

    #[test]
    fn symmetric_thrust_cancels_torque() {
        let (f, tau) = mixer_forward(&ThrustCommand::uniform(1.0), &params(0.5, 0.1));
        assert_eq!(f, 4.0);
        assert_eq!(tau, Vec3::zeros());
    }

    #[test]
    fn mixer_matches_explicit_product() {
        let p = params(0.5, 0.1);
        let cmd = ThrustCommand([1.0, 0.0, 1.0, 0.0]);
        let (f, tau) = mixer_forward(&cmd, &p);
        let a = 0.5 * 0.5f64.sqrt();
        let rows = [
            [1.0, 1.0, 1.0, 1.0],
            [a, -a, a, -a],
            [a, a, -a, -a],
            [0.1, -0.1, 0.1, -0.1],
        ];
        let dot = |r: [f64; 4]| r.iter().zip(cmd.0).map(|(x, t)| x * t).sum::<f64>();
        assert_eq!(f, dot(rows[0]));
        assert!((tau - Vec3::new(dot(rows[1]), dot(rows[2]), dot(rows[3]))).norm() < 1e-15);
        assert!((tau - Vec3::new(std::f64::consts::FRAC_1_SQRT_2, 0.0, 0.2)).norm() < 1e-15);
    }

    #[test]
    fn hover_thrust_balances_weight() {
        let p = QuadParams::default();
        let (f, tau) = mixer_forward(&ThrustCommand::uniform(p.hover_thrust()), &p);
        assert!((f - p.mass * 9.8).abs() < 1e-12);
        assert_eq!(tau, Vec3::zeros());
        let d = quad_derivative(
            &RigidBodyState::default(),
            &ThrustCommand::uniform(p.hover_thrust()),
            &p,
        );
        assert!(d.dv.norm() < 1e-14);
        assert_eq!(d.domega, Vec3::zeros());
    }

    #[test]
    fn mixer_has_a_single_null_direction() {
        let p = QuadParams::default();
        let h = mixer_matrix(&p);
        assert_eq!(h.rank(1e-12), 3);
        let null = Vector4::new(1.0, -1.0, -1.0, 1.0);
        assert!((h * null).amax() < 1e-15);
        // Anything orthogonal to it survives the round trip.
        let cmd = ThrustCommand([1.0, 0.0, 1.0, 0.0]);
        let (f, tau) = mixer_forward(&cmd, &p);
        let back = mixer_inverse(f, &tau, &p);
        assert!(back.0.iter().zip(cmd.0).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_thrust_is_free_fall() {
        let d = quad_derivative(
            &RigidBodyState::default(),
            &ThrustCommand::default(),
            &QuadParams::default(),
        );
        assert_eq!(d.dv, gravity());
    }

    #[test]
    fn angular_acceleration_matches_component_euler_equations() {
        let p = QuadParams {
            inertia: Mat3::from_diagonal(&Vec3::new(0.01, 0.015, 0.02)),
            ..QuadParams::default()
        };
        let s = RigidBodyState {
            omega: Vec3::new(0.1, 0.0, 0.0),
            ..RigidBodyState::default()
        };
        let cmd = ThrustCommand([3.0, 1.0, 2.0, 0.5]);
        let d = quad_derivative(&s, &cmd, &p);
        let (_, tau) = mixer_forward(&cmd, &p);
        let (jx, jy, jz) = (0.01, 0.015, 0.02);
        let (wx, wy, wz) = (0.1, 0.0, 0.0);
        let expect = Vec3::new(
            (tau.x - (jz - jy) * wy * wz) / jx,
            (tau.y - (jx - jz) * wz * wx) / jy,
            (tau.z - (jy - jx) * wx * wy) / jz,
        );
        assert!((d.domega - expect).norm() < 1e-12);
    }

    #[test]
    fn principal_axis_spin_is_preserved() {
        let p = QuadParams::default();
        let mut s = RigidBodyState {
            omega: Vec3::new(0.0, 0.0, 1.5),
            ..RigidBodyState::default()
        };
        let jinv = p.inertia_inverse();
        for _ in 0..100 {
            s = rk4_step(
                &s,
                |x| quad_derivative_with(x, &ThrustCommand::default(), &p, &jinv),
                0.01,
            )
            .unwrap();
        }
        assert!((s.omega - Vec3::new(0.0, 0.0, 1.5)).norm() < 1e-9);
    }

    #[test]
    fn thrust_force_points_along_negative_body_z() {
        let s = RigidBodyState {
            q: Quaternion::from_axis_angle(&Vec3::x(), std::f64::consts::FRAC_PI_2),
            ..RigidBodyState::default()
        };
        let f = quad_force(&s, &ThrustCommand::uniform(1.0));
        assert!((f - Vec3::new(0.0, 4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fault_has_a_closed_lower_boundary() {
        let fault = MotorFault {
            motor: 1,
            onset: 2.0,
        };
        let cmd = ThrustCommand::uniform(2.0);
        assert_eq!(apply_motor_fault(&cmd, &fault, 1.9), cmd);
        assert_eq!(apply_motor_fault(&cmd, &fault, 2.0).0, [0.0, 2.0, 2.0, 2.0]);
        assert_eq!(apply_motor_fault(&cmd, &fault, 2.1).0, [0.0, 2.0, 2.0, 2.0]);
        assert!(MotorFault {
            motor: 5,
            onset: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn one_motor_out_can_still_hover() {
        let p = QuadParams::default();
        let t = allocate_thrust(
            p.mass * 9.8,
            &Vec3::zeros(),
            &p,
            [true, false, false, false],
        );
        assert_eq!(t.0[0], 0.0);
        let (f, tau) = mixer_forward(&t, &p);
        assert!((f - 9.8).abs() < 1e-9, "{t:?}");
        assert!(tau.norm() < 1e-9);
        assert!(t.within(p.max_thrust));
    }

    #[test]
    fn tracker_holds_level_hover() {
        let p = QuadParams::default();
        let cmd = ForceTracker::default().command(
            &RigidBodyState::default(),
            &(-9.8 * Vec3::z()),
            &p,
            [false; 4],
        );
        for t in cmd.0 {
            assert!((t - 2.45).abs() < 1e-12);
        }
    }

    #[test]
    fn tracker_tilts_toward_lateral_force() {
        let p = QuadParams::default();
        let jinv = p.inertia_inverse();
        let target = Vec3::new(2.0, 0.0, -9.8);
        let mut s = RigidBodyState::default();
        for _ in 0..500 {
            let cmd = ForceTracker::default().command(&s, &target, &p, [false; 4]);
            s = rk4_step(&s, |x| quad_derivative_with(x, &cmd, &p, &jinv), 0.002).unwrap();
        }
        let f = quad_force(
            &s,
            &ForceTracker::default().command(&s, &target, &p, [false; 4]),
        );
        assert!((f.normalize() - target.normalize()).norm() < 1e-3, "{f}");
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = QuadParams::default();
        p.inertia[(0, 1)] = 0.5;
        assert!(p.validate().is_err());
        assert!(QuadParams {
            mass: 0.0,
            ..QuadParams::default()
        }
        .validate()
        .is_err());
        assert!(QuadParams::default().validate().is_ok());
    }
}
