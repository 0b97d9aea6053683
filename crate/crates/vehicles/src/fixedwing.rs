//! Fixed-wing UAV: propeller with downwash, surface-by-surface aerodynamics
//! and left-wing loss.
//!
//! Aerodynamic coefficients are affine in their arguments. Body rates enter
//! nondimensionalized (`p b / 2V_a`, `q c / 2V_a`, `r b / 2V_a`).

use gcf_core::{gravity, Mat3, Vec3, WindAngles};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VehicleError};
use crate::quad::check_inertia;
use crate::state::{rigid_body_derivative, RigidBodyState, StateDerivative};

/// Airspeed floor used only when nondimensionalizing body rates, m/s.
pub const RATE_AIRSPEED_FLOOR: f64 = 0.5;
/// Below this airspeed α and β are undefined and reported as zero, m/s.
pub const DEGENERATE_AIRSPEED: f64 = 1e-6;

/// `base + alpha·α + q·q̂`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaCoeff {
    pub base: f64,
    pub alpha: f64,
    pub q: f64,
}

impl AlphaCoeff {
    pub fn eval(&self, alpha: f64, q: f64) -> f64 {
        self.base + self.alpha * alpha + self.q * q
    }
}

/// `base + beta·β + p·p̂ + r·r̂`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaCoeff {
    pub base: f64,
    pub beta: f64,
    pub p: f64,
    pub r: f64,
}

impl BetaCoeff {
    pub fn eval(&self, beta: f64, p: f64, r: f64) -> f64 {
        self.base + self.beta * beta + self.p * p + self.r * r
    }
}

/// One wing's `base + alpha·α + q·q̂ + delta·δ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WingAlphaCoeff {
    pub base: f64,
    pub alpha: f64,
    pub q: f64,
    pub delta: f64,
}

impl WingAlphaCoeff {
    pub fn eval(&self, alpha: f64, q: f64, delta: f64) -> f64 {
        self.base + self.alpha * alpha + self.q * q + self.delta * delta
    }
}

/// One wing's `base + beta·β + p·p̂ + r·r̂ + delta·δ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WingBetaCoeff {
    pub base: f64,
    pub beta: f64,
    pub p: f64,
    pub r: f64,
    pub delta: f64,
}

impl WingBetaCoeff {
    pub fn eval(&self, beta: f64, p: f64, r: f64, delta: f64) -> f64 {
        self.base + self.beta * beta + self.p * p + self.r * r + self.delta * delta
    }
}

/// `base + delta·δ` for a surface washed by the propeller.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceCoeff {
    pub base: f64,
    pub delta: f64,
}

impl SurfaceCoeff {
    pub fn eval(&self, delta: f64) -> f64 {
        self.base + self.delta * delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingPair<C> {
    pub left: C,
    pub right: C,
}

impl WingPair<WingAlphaCoeff> {
    /// Identical wings with opposite deflection sensitivity.
    pub fn mirrored(left: WingAlphaCoeff) -> Self {
        Self {
            left,
            right: WingAlphaCoeff {
                delta: -left.delta,
                ..left
            },
        }
    }

    fn symmetric(&self) -> bool {
        self.left.delta == -self.right.delta
    }
}

impl WingPair<WingBetaCoeff> {
    /// Mirror-image wings: the intercept and the deflection sensitivity change
    /// sign, the rate and sideslip slopes are shared.
    pub fn mirrored(left: WingBetaCoeff) -> Self {
        Self {
            left,
            right: WingBetaCoeff {
                base: -left.base,
                delta: -left.delta,
                ..left
            },
        }
    }

    fn symmetric(&self) -> bool {
        self.left.delta == -self.right.delta
    }
}

/// Every force and moment coefficient, by surface.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroCoeffTable {
    pub drag_fuselage: AlphaCoeff,
    pub drag_wing: WingPair<WingAlphaCoeff>,
    pub drag_elevator: SurfaceCoeff,
    pub side_fuselage: BetaCoeff,
    pub side_wing: WingPair<WingBetaCoeff>,
    pub side_rudder: SurfaceCoeff,
    pub lift_fuselage: AlphaCoeff,
    pub lift_wing: WingPair<WingAlphaCoeff>,
    pub lift_elevator: SurfaceCoeff,
    pub roll_fuselage: BetaCoeff,
    pub roll_wing: WingPair<WingBetaCoeff>,
    pub roll_rudder: SurfaceCoeff,
    pub pitch_fuselage: AlphaCoeff,
    pub pitch_wing: WingPair<WingAlphaCoeff>,
    pub pitch_elevator: SurfaceCoeff,
    pub yaw_fuselage: BetaCoeff,
    pub yaw_wing: WingPair<WingBetaCoeff>,
    pub yaw_rudder: SurfaceCoeff,
}

impl AeroCoeffTable {
    /// Desk-scale default set for a 2 kg, 2 m span aircraft.
    pub fn desk_scale() -> Self {
        Self {
            drag_fuselage: AlphaCoeff {
                base: 0.03,
                alpha: 0.05,
                q: 0.0,
            },
            drag_wing: WingPair::<WingAlphaCoeff>::mirrored(WingAlphaCoeff {
                base: 0.01,
                alpha: 0.05,
                q: 0.0,
                delta: 0.0,
            }),
            drag_elevator: SurfaceCoeff {
                base: 0.005,
                delta: 0.0,
            },
            side_fuselage: BetaCoeff {
                base: 0.0,
                beta: -0.1,
                p: 0.0,
                r: 0.0,
            },
            side_wing: WingPair::<WingBetaCoeff>::mirrored(WingBetaCoeff {
                base: 0.0,
                beta: -0.025,
                p: 0.0,
                r: 0.0,
                delta: 0.0,
            }),
            side_rudder: SurfaceCoeff {
                base: 0.0,
                delta: 0.05,
            },
            lift_fuselage: AlphaCoeff {
                base: 0.0,
                alpha: 0.3,
                q: 0.0,
            },
            lift_wing: WingPair::<WingAlphaCoeff>::mirrored(WingAlphaCoeff {
                base: 0.1,
                alpha: 2.0,
                q: 2.0,
                delta: 0.3,
            }),
            lift_elevator: SurfaceCoeff {
                base: 0.0,
                delta: 0.2,
            },
            roll_fuselage: BetaCoeff {
                base: 0.0,
                beta: -0.05,
                p: -0.4,
                r: 0.05,
            },
            roll_wing: WingPair::<WingBetaCoeff>::mirrored(WingBetaCoeff {
                base: 0.05,
                beta: -0.02,
                p: -0.2,
                r: 0.02,
                delta: 0.15,
            }),
            roll_rudder: SurfaceCoeff {
                base: 0.0,
                delta: 0.005,
            },
            pitch_fuselage: AlphaCoeff {
                base: 0.0,
                alpha: -0.5,
                q: -5.0,
            },
            pitch_wing: WingPair::<WingAlphaCoeff>::mirrored(WingAlphaCoeff {
                base: 0.0,
                alpha: -0.1,
                q: -2.0,
                delta: 0.0,
            }),
            pitch_elevator: SurfaceCoeff {
                base: 0.0,
                delta: -0.5,
            },
            yaw_fuselage: BetaCoeff {
                base: 0.0,
                beta: 0.08,
                p: 0.0,
                r: -0.1,
            },
            yaw_wing: WingPair::<WingBetaCoeff>::mirrored(WingBetaCoeff {
                base: -0.005,
                beta: 0.0,
                p: 0.0,
                r: -0.02,
                delta: 0.0,
            }),
            yaw_rudder: SurfaceCoeff {
                base: 0.0,
                delta: -0.05,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("drag", self.drag_wing.symmetric()),
            ("lift", self.lift_wing.symmetric()),
            ("pitch", self.pitch_wing.symmetric()),
            ("side", self.side_wing.symmetric()),
            ("roll", self.roll_wing.symmetric()),
            ("yaw", self.yaw_wing.symmetric()),
        ];
        for (name, ok) in pairs {
            if !ok {
                return Err(VehicleError::InvalidParams(format!(
                    "{name} wing coefficients: left deflection slope must be the negative of the right"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FwParams {
    pub mass: f64,
    pub inertia: Mat3,
    /// Air density, kg/m³.
    pub rho: f64,
    pub wing_area: f64,
    pub prop_area: f64,
    pub span: f64,
    pub chord: f64,
    /// Propeller thrust coefficient `C_p`.
    pub thrust_coeff: f64,
    /// Downwash speed per unit throttle `k_m`, m/s.
    pub downwash_gain: f64,
    /// Propeller speed per unit throttle `k_Ω`, rad/s.
    pub prop_speed_gain: f64,
    /// Propeller torque constant `k_Tp`.
    pub prop_torque: f64,
    pub aileron_limit: f64,
    pub elevator_limit: f64,
    pub rudder_limit: f64,
    #[serde(default = "Vec3::zeros")]
    pub gyro: Vec3,
    pub coefficients: AeroCoeffTable,
}

impl Default for FwParams {
    fn default() -> Self {
        Self {
            mass: 2.0,
            inertia: Mat3::from_diagonal(&Vec3::new(0.1, 0.15, 0.22)),
            rho: 1.225,
            wing_area: 0.5,
            prop_area: 0.05,
            span: 2.0,
            chord: 0.25,
            thrust_coeff: 1.0,
            downwash_gain: 30.0,
            prop_speed_gain: 500.0,
            prop_torque: 1e-7,
            aileron_limit: 0.4,
            elevator_limit: 0.4,
            rudder_limit: 0.4,
            gyro: Vec3::zeros(),
            coefficients: AeroCoeffTable::desk_scale(),
        }
    }
}

impl FwParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mass", self.mass),
            ("rho", self.rho),
            ("wing_area", self.wing_area),
            ("prop_area", self.prop_area),
            ("span", self.span),
            ("chord", self.chord),
            ("thrust_coeff", self.thrust_coeff),
            ("downwash_gain", self.downwash_gain),
            ("prop_speed_gain", self.prop_speed_gain),
            ("prop_torque", self.prop_torque),
            ("aileron_limit", self.aileron_limit),
            ("elevator_limit", self.elevator_limit),
            ("rudder_limit", self.rudder_limit),
        ];
        for (name, x) in named {
            if !(x > 0.0 && x.is_finite()) {
                return Err(VehicleError::InvalidParams(format!(
                    "{name} must be positive, got {x}"
                )));
            }
        }
        check_inertia(&self.inertia)?;
        self.coefficients.validate()
    }

    pub fn inertia_inverse(&self) -> Mat3 {
        self.inertia.try_inverse().unwrap_or_else(Mat3::zeros)
    }

    /// Lower and upper command bounds in [`SurfaceCommand::to_array`] order.
    pub fn command_bounds(&self) -> ([f64; 5], [f64; 5]) {
        (
            [
                0.0,
                -self.aileron_limit,
                -self.aileron_limit,
                -self.elevator_limit,
                -self.rudder_limit,
            ],
            [
                1.0,
                self.aileron_limit,
                self.aileron_limit,
                self.elevator_limit,
                self.rudder_limit,
            ],
        )
    }
}

/// Throttle and surface deflections.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceCommand {
    pub delta_t: f64,
    pub delta_al: f64,
    pub delta_ar: f64,
    pub delta_e: f64,
    pub delta_r: f64,
}

impl SurfaceCommand {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.delta_t,
            self.delta_al,
            self.delta_ar,
            self.delta_e,
            self.delta_r,
        ]
    }

    pub fn from_slice(u: &[f64]) -> Self {
        Self {
            delta_t: u[0],
            delta_al: u[1],
            delta_ar: u[2],
            delta_e: u[3],
            delta_r: u[4],
        }
    }

    pub fn clamped(&self, params: &FwParams) -> Self {
        let (lo, hi) = params.command_bounds();
        let u = self.to_array();
        Self::from_slice(&std::array::from_fn::<f64, 5, _>(|i| {
            u[i].clamp(lo[i], hi[i])
        }))
    }

    pub fn within(&self, params: &FwParams) -> bool {
        let (lo, hi) = params.command_bounds();
        self.to_array()
            .iter()
            .enumerate()
            .all(|(i, x)| (lo[i]..=hi[i]).contains(x))
    }
}

/// Complete loss of the left wing (and its aileron) from `onset` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingLossFault {
    pub onset: f64,
}

impl WingLossFault {
    pub fn validate(&self) -> Result<()> {
        if self.onset >= 0.0 && self.onset.is_finite() {
            Ok(())
        } else {
            Err(VehicleError::InvalidParams(format!(
                "fault onset {} must be non-negative",
                self.onset
            )))
        }
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.onset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirflowState {
    /// Air-relative velocity in body axes.
    pub v_a: Vec3,
    pub airspeed: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Airspeed too small for α, β to be defined.
    pub degenerate: bool,
}

impl AirflowState {
    pub fn angles(&self) -> WindAngles {
        WindAngles {
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Airflow relative to the body for earth-frame velocity `v`, wind `v_w` and
/// body-to-earth rotation `r`.
pub fn airflow_state(v: &Vec3, v_w: &Vec3, r: &Mat3) -> AirflowState {
    airflow_from_body(r.transpose() * (v - v_w))
}

pub fn airflow_from_body(v_a: Vec3) -> AirflowState {
    let airspeed = v_a.norm();
    if airspeed < DEGENERATE_AIRSPEED {
        return AirflowState {
            v_a,
            airspeed,
            alpha: 0.0,
            beta: 0.0,
            degenerate: true,
        };
    }
    AirflowState {
        v_a,
        airspeed,
        alpha: v_a.z.atan2(v_a.x),
        beta: (v_a.y / airspeed).clamp(-1.0, 1.0).asin(),
        degenerate: false,
    }
}

/// Speed of the propeller slipstream.
pub fn downwash_speed(delta_t: f64, k_m: f64) -> f64 {
    k_m * delta_t
}

/// Propeller force and torque in body axes.
pub fn propeller_wrench(delta_t: f64, airspeed: f64, params: &FwParams) -> (Vec3, Vec3) {
    let ve = downwash_speed(delta_t, params.downwash_gain);
    let thrust =
        0.5 * params.rho * params.prop_area * params.thrust_coeff * (ve * ve - airspeed * airspeed);
    let spin = params.prop_speed_gain * delta_t;
    (
        Vec3::new(thrust, 0.0, 0.0),
        Vec3::new(-params.prop_torque * spin * spin, 0.0, 0.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroWrench {
    /// `(-drag, side, lift)` in wind axes, as stacked by the model.
    pub force: Vec3,
    /// Roll, pitch, yaw moments in body axes.
    pub moment: Vec3,
    pub degenerate: bool,
}

/// Aerodynamic force and moment from every surface. With `wing_lost` the left
/// wing contributes nothing and its aileron is ignored.
pub fn aero_wrench(
    air: &AirflowState,
    omega: &Vec3,
    cmd: &SurfaceCommand,
    params: &FwParams,
    wing_lost: bool,
) -> AeroWrench {
    let t = &params.coefficients;
    let (alpha, beta) = (air.alpha, air.beta);
    let va_rate = air.airspeed.max(RATE_AIRSPEED_FLOOR);
    let p = omega.x * params.span / (2.0 * va_rate);
    let q = omega.y * params.chord / (2.0 * va_rate);
    let r = omega.z * params.span / (2.0 * va_rate);
    let ve = downwash_speed(cmd.delta_t, params.downwash_gain);
    let d_al = if wing_lost { 0.0 } else { cmd.delta_al };
    let left = |value: f64| if wing_lost { 0.0 } else { value };

    let qa = 0.5 * params.rho * air.airspeed * air.airspeed * params.wing_area;
    let qe = 0.5 * params.rho * ve * ve * params.wing_area;
    let (b, c) = (params.span, params.chord);

    let drag = -qa * t.drag_fuselage.eval(alpha, q)
        - qa * left(t.drag_wing.left.eval(alpha, q, d_al))
        - qa * t.drag_wing.right.eval(alpha, q, cmd.delta_ar)
        - qe * t.drag_elevator.eval(cmd.delta_e);
    let side = qa * b * t.side_fuselage.eval(beta, p, r)
        + qa * b * left(t.side_wing.left.eval(beta, p, r, d_al))
        + qa * b * t.side_wing.right.eval(beta, p, r, cmd.delta_ar)
        + qe * b * t.side_rudder.eval(cmd.delta_r);
    let lift = qa * t.lift_fuselage.eval(alpha, q)
        + qa * left(t.lift_wing.left.eval(alpha, q, d_al))
        + qa * t.lift_wing.right.eval(alpha, q, cmd.delta_ar)
        + qe * t.lift_elevator.eval(cmd.delta_e);

    let roll = qa * b * t.roll_fuselage.eval(beta, p, r)
        + qa * b * left(t.roll_wing.left.eval(beta, p, r, d_al))
        + qa * b * t.roll_wing.right.eval(beta, p, r, cmd.delta_ar)
        + qe * b * t.roll_rudder.eval(cmd.delta_r);
    let pitch = qa * c * t.pitch_fuselage.eval(alpha, q)
        + qa * c * left(t.pitch_wing.left.eval(alpha, q, d_al))
        + qa * c * t.pitch_wing.right.eval(alpha, q, cmd.delta_ar)
        + qe * c * t.pitch_elevator.eval(cmd.delta_e);
    let yaw = qa * b * t.yaw_fuselage.eval(beta, p, r)
        + qa * b * left(t.yaw_wing.left.eval(beta, p, r, d_al))
        + qa * b * t.yaw_wing.right.eval(beta, p, r, cmd.delta_ar)
        + qe * b * t.yaw_rudder.eval(cmd.delta_r);

    AeroWrench {
        force: Vec3::new(drag, side, lift),
        moment: Vec3::new(roll, pitch, yaw),
        degenerate: air.degenerate,
    }
}

/// Maps the stacked `(-drag, side, lift)` into wind axes, where lift points
/// along `-z`.
fn wind_axes(f: &Vec3) -> Vec3 {
    Vec3::new(f.x, f.y, -f.z)
}

/// Everything the fixed-wing model produces at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwWrench {
    /// Total propulsive plus aerodynamic force, earth frame.
    pub force: Vec3,
    /// Total propulsive plus aerodynamic moment, body frame.
    pub moment: Vec3,
    pub airflow: AirflowState,
}

pub fn fw_wrench(
    s: &RigidBodyState,
    cmd: &SurfaceCommand,
    params: &FwParams,
    wind: &Vec3,
    wing_lost: bool,
) -> FwWrench {
    let rot = s.q.rotation();
    let air = airflow_state(&s.v, wind, &rot);
    let (f_p, m_p) = propeller_wrench(cmd.delta_t, air.airspeed, params);
    let aero = aero_wrench(&air, &s.omega, cmd, params, wing_lost);
    let body = f_p + air.angles().wind_to_body() * wind_axes(&aero.force);
    FwWrench {
        force: rot * body,
        moment: m_p + aero.moment,
        airflow: air,
    }
}

pub fn fw_derivative(
    s: &RigidBodyState,
    cmd: &SurfaceCommand,
    params: &FwParams,
    wind: &Vec3,
    wing_lost: bool,
) -> StateDerivative {
    fw_derivative_with(s, cmd, params, &params.inertia_inverse(), wind, wing_lost)
}

pub fn fw_derivative_with(
    s: &RigidBodyState,
    cmd: &SurfaceCommand,
    params: &FwParams,
    inertia_inv: &Mat3,
    wind: &Vec3,
    wing_lost: bool,
) -> StateDerivative {
    let w = fw_wrench(s, cmd, params, wind, wing_lost);
    let accel = gravity() + w.force / params.mass;
    rigid_body_derivative(
        s,
        accel,
        &params.inertia,
        inertia_inv,
        params.gyro + w.moment,
    )
}
