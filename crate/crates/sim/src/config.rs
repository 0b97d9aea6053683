//! Scenario and horizon-problem configuration documents.

use gcf_core::{
    FeasibleSet, HeightGrid, HorizonGrid, HorizonProblem, HorizonWeights, PdGains, PriorityWeights,
    Vec3, TOL,
};
use gcf_vehicles::{
    FwParams, MotorFault, MpcSettings, QuadParams, RigidBodyState, SurfaceCommand, WingLossFault,
};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::reference::Reference;

/// Schema version accepted by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VehicleSpec {
    Quad {
        #[serde(default)]
        params: QuadParams,
    },
    FixedWing {
        #[serde(default)]
        params: Box<FwParams>,
        /// Command used before the first controller update and to seed cold
        /// MPC starts.
        #[serde(default)]
        nominal: Option<SurfaceCommand>,
    },
}

impl VehicleSpec {
    pub fn mass(&self) -> f64 {
        match self {
            VehicleSpec::Quad { params } => params.mass,
            VehicleSpec::FixedWing { params, .. } => params.mass,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            VehicleSpec::Quad { .. } => 4,
            VehicleSpec::FixedWing { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocMode {
    Lex,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// No control input at all.
    None,
    /// Single-instant allocation, realized by the vehicle's force tracker.
    StaticAlloc {
        mode: AllocMode,
        set: FeasibleSet,
        #[serde(default)]
        weights: PriorityWeights,
        #[serde(default)]
        gains: PdGains,
        /// Shooting settings used when the vehicle has no direct force tracker.
        #[serde(default)]
        mpc: MpcSettings,
    },
    /// Shooting MPC over the vehicle's own commands with the impulse cost.
    ImpulseMpc {
        #[serde(default)]
        weights: HorizonWeights,
        #[serde(default)]
        gains: PdGains,
        #[serde(default)]
        mpc: MpcSettings,
    },
    /// Force schedule from the energy viewpoint along the descent, node 0
    /// realized by the vehicle.
    EnergyMpc {
        set: FeasibleSet,
        /// Height span of the work integrals, m.
        span: f64,
        nodes: usize,
        #[serde(default)]
        weights: HorizonWeights,
        #[serde(default)]
        gains: PdGains,
        #[serde(default)]
        mpc: MpcSettings,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultSpec {
    Motor { motor: usize, onset: f64 },
    WingLoss { onset: f64 },
}

impl FaultSpec {
    pub fn onset(&self) -> f64 {
        match self {
            FaultSpec::Motor { onset, .. } | FaultSpec::WingLoss { onset } => *onset,
        }
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.onset()
    }

    pub fn motor(&self) -> Option<MotorFault> {
        match *self {
            FaultSpec::Motor { motor, onset } => Some(MotorFault { motor, onset }),
            FaultSpec::WingLoss { .. } => None,
        }
    }

    pub fn wing(&self) -> Option<WingLossFault> {
        match *self {
            FaultSpec::WingLoss { onset } => Some(WingLossFault { onset }),
            FaultSpec::Motor { .. } => None,
        }
    }
}

fn default_period() -> f64 {
    0.02
}

fn default_dt() -> f64 {
    0.002
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub vehicle: VehicleSpec,
    pub initial_state: RigidBodyState,
    /// Altitude of the earth-frame origin above the ground, m.
    pub ground_offset: f64,
    pub reference: Reference,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub fault: Option<FaultSpec>,
    #[serde(default = "Vec3::zeros")]
    pub wind: Vec3,
    /// Constant external force known to the controller, N.
    #[serde(default)]
    pub disturbance: Option<Vec3>,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_period")]
    pub controller_period: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub stop_at_ground: bool,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Plant steps between controller updates.
    pub fn period_steps(&self) -> usize {
        (self.controller_period / self.dt).round() as usize
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt {} must be positive", self.dt));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return bad(format!("duration {} must be at least dt", self.duration));
        }
        let ratio = self.controller_period / self.dt;
        if !(ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
            return bad(format!(
                "controller period {} must be a whole multiple of dt {}",
                self.controller_period, self.dt
            ));
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return bad(format!(
                "duration {} must be a whole multiple of dt {}",
                self.duration, self.dt
            ));
        }
        if !self.ground_offset.is_finite() || !self.initial_state.is_finite() {
            return bad("initial state and ground offset must be finite".into());
        }
        if (self.initial_state.q.norm() - 1.0).abs() > TOL.quat_flag {
            return bad("initial attitude quaternion must be unit length".into());
        }
        if !gcf_core::math::is_finite(&self.wind)
            || self
                .disturbance
                .is_some_and(|d| !gcf_core::math::is_finite(&d))
        {
            return bad("wind and disturbance must be finite".into());
        }
        match &self.vehicle {
            VehicleSpec::Quad { params } => params.validate()?,
            VehicleSpec::FixedWing { params, nominal } => {
                params.validate()?;
                if nominal.is_some_and(|n| !n.within(params)) {
                    return bad("nominal fixed-wing command outside surface limits".into());
                }
            }
        }
        match (&self.fault, &self.vehicle) {
            (Some(FaultSpec::Motor { motor, onset }), VehicleSpec::Quad { .. }) => MotorFault {
                motor: *motor,
                onset: *onset,
            }
            .validate()?,
            (Some(FaultSpec::WingLoss { onset }), VehicleSpec::FixedWing { .. }) => {
                WingLossFault { onset: *onset }.validate()?
            }
            (None, _) => {}
            (Some(f), _) => return bad(format!("fault {f:?} does not apply to this vehicle")),
        }
        self.reference.validate()?;
        match &self.controller {
            ControllerSpec::None => {}
            ControllerSpec::StaticAlloc {
                set,
                weights,
                gains,
                mpc,
                mode,
            } => {
                set.validate()?;
                gains.validate()?;
                if *mode == AllocMode::Weighted {
                    weights.validate()?;
                }
                mpc.validate()?;
            }
            ControllerSpec::ImpulseMpc {
                weights,
                gains,
                mpc,
            } => {
                strict_weights(weights)?;
                gains.validate()?;
                mpc.validate()?;
            }
            ControllerSpec::EnergyMpc {
                set,
                span,
                nodes,
                weights,
                gains,
                mpc,
            } => {
                set.validate()?;
                HeightGrid::new(0.0, *span, *nodes)?;
                strict_weights(weights)?;
                gains.validate()?;
                mpc.validate()?;
            }
        }
        Ok(())
    }
}

/// Scenario weights must keep every tier active: `w_g > w_t > w_e > 0`.
fn strict_weights(w: &HorizonWeights) -> Result<()> {
    w.validate()?;
    if w.energy > 0.0 {
        Ok(())
    } else {
        Err(SimError::Config("energy weight must be positive".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Viewpoint {
    Impulse,
    Energy,
}

/// A standalone horizon problem with time-constant data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub version: u32,
    pub mass: f64,
    #[serde(default = "gcf_core::gravity")]
    pub gravity: Vec3,
    /// Desired acceleration, held over the horizon.
    pub accel_desired: Vec3,
    pub set: FeasibleSet,
    #[serde(default)]
    pub weights: HorizonWeights,
    #[serde(default)]
    pub disturbance: Option<Vec3>,
    pub nodes: usize,
    /// Impulse viewpoint: horizon start and length, s.
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Energy viewpoint: starting z and descent span, m.
    #[serde(default)]
    pub h0: f64,
    #[serde(default = "default_span")]
    pub span: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
}

fn default_horizon() -> f64 {
    2.0
}

fn default_span() -> f64 {
    10.0
}

fn default_iterations() -> usize {
    TOL.horizon_iters
}

impl HorizonConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(SimError::Config(format!(
                "unsupported config version {}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn problem(&self, viewpoint: Viewpoint) -> Result<HorizonProblem> {
        let mut prob = match viewpoint {
            Viewpoint::Impulse => HorizonProblem::impulse(
                HorizonGrid::new(self.t0, self.horizon, self.nodes)?,
                self.mass,
                self.gravity,
                self.accel_desired,
                self.set.clone(),
            ),
            Viewpoint::Energy => HorizonProblem::energy(
                HeightGrid::new(self.h0, self.span, self.nodes)?,
                self.mass,
                self.gravity,
                self.accel_desired,
                self.set.clone(),
            ),
        }
        .with_weights(self.weights);
        prob.disturbance = self.disturbance.map(|d| vec![d; self.nodes]);
        prob.max_iterations = self.max_iterations;
        prob.validate()?;
        Ok(prob)
    }
}
