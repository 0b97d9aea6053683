//! Closed-loop scenario execution.

use gcf_core::{
    desired_acceleration, energy_cost, gravity, impulse_cost, solve_lexicographic, solve_weighted,
    solve_weighted_disturbed, AllocProblem, CostTerms, FeasibleSet, FrameConvention, HeightGrid,
    HorizonController, HorizonGrid, HorizonProblem, HorizonSolution, HorizonWeights, Mat3, PdGains,
    PriorityWeights, Vec3,
};
use gcf_vehicles::fixedwing::fw_derivative_with;
use gcf_vehicles::quad::quad_derivative_with;
use gcf_vehicles::{
    apply_motor_fault, rk4_step, ForceTracker, FwMpc, FwParams, FwPlant, MpcSettings, QuadMpc,
    QuadParams, QuadPlant, RigidBodyState, ShootingInput, ShootingResult, StateDerivative,
    SurfaceCommand, ThrustCommand,
};
use serde::Serialize;

use crate::config::{AllocMode, ControllerSpec, FaultSpec, ScenarioConfig, VehicleSpec};
use crate::error::{Result, SimError};
use crate::reference::Reference;

/// Everything known at one plant step. `command` is what the plant received
/// over `[t, t + dt)`, after any fault; the force split is the one chosen at
/// the most recent controller update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub state: RigidBodyState,
    pub command: Vec<f64>,
    pub f_g: Vec3,
    pub f_t: Vec3,
    pub f_d: Vec3,
    pub cost: CostTerms,
    pub fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Duration,
    Ground,
    IntegrationError,
}

/// Ground contact, linearly interpolated between the bracketing steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Touchdown {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The solver hit its iteration cap; its best iterate was applied.
    NotConverged,
    /// The solver returned an error; the previous command was held.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerEvent {
    pub t: f64,
    pub kind: EventKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimLog {
    pub name: String,
    pub dt: f64,
    pub mass: f64,
    pub ground_offset: f64,
    pub control_dim: usize,
    pub reference: Reference,
    pub records: Vec<StepRecord>,
    pub touchdown: Option<Touchdown>,
    pub termination: Termination,
    pub events: Vec<ControllerEvent>,
}

impl SimLog {
    pub fn altitude(&self, p: &Vec3) -> f64 {
        FrameConvention::new(self.ground_offset).altitude(p)
    }

    pub fn final_state(&self) -> Option<&RigidBodyState> {
        self.records.last().map(|r| &r.state)
    }
}

enum Plant {
    Quad {
        params: QuadParams,
        inertia_inv: Mat3,
    },
    Fw {
        params: Box<FwParams>,
        inertia_inv: Mat3,
        wind: Vec3,
    },
}

impl Plant {
    fn derivative(
        &self,
        s: &RigidBodyState,
        u: &[f64],
        wing_lost: bool,
        accel_extra: &Vec3,
    ) -> StateDerivative {
        let mut d = match self {
            Plant::Quad {
                params,
                inertia_inv,
            } => quad_derivative_with(
                s,
                &ThrustCommand([u[0], u[1], u[2], u[3]]),
                params,
                inertia_inv,
            ),
            Plant::Fw {
                params,
                inertia_inv,
                wind,
            } => fw_derivative_with(
                s,
                &SurfaceCommand::from_slice(u),
                params,
                inertia_inv,
                wind,
                wing_lost,
            ),
        };
        d.dv += accel_extra;
        d
    }
}

/// How a force target or schedule reaches the actuators.
enum Realizer {
    Zero,
    Tracker {
        tracker: ForceTracker,
        params: QuadParams,
    },
    Quad(Box<QuadMpc>),
    Fw(Box<FwMpc>),
}

enum Outer {
    None,
    Static {
        mode: AllocMode,
        set: FeasibleSet,
        weights: PriorityWeights,
        gains: PdGains,
    },
    Impulse {
        weights: HorizonWeights,
        gains: PdGains,
    },
    Energy {
        set: FeasibleSet,
        span: f64,
        nodes: usize,
        weights: HorizonWeights,
        gains: PdGains,
        horizon: HorizonController,
    },
}

/// Output of one controller update.
struct Update {
    f_g: Vec3,
    f_t: Vec3,
    f_d: Vec3,
    cost: CostTerms,
    converged: bool,
}

struct Controller {
    outer: Outer,
    realizer: Realizer,
    mass: f64,
    disturbance: Option<Vec3>,
    fault: Option<FaultSpec>,
    reference: Reference,
    /// Force handed to the tracker.
    target: Vec3,
    schedule: Option<(ShootingResult, f64)>,
    split: (Vec3, Vec3, Vec3, CostTerms),
}

impl Controller {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let mpc_settings = |spec: &ControllerSpec| -> MpcSettings {
            match spec {
                ControllerSpec::None => MpcSettings::default(),
                ControllerSpec::StaticAlloc { mpc, .. }
                | ControllerSpec::ImpulseMpc { mpc, .. }
                | ControllerSpec::EnergyMpc { mpc, .. } => *mpc,
            }
        };
        let settings = mpc_settings(&cfg.controller);
        let outer = match &cfg.controller {
            ControllerSpec::None => Outer::None,
            ControllerSpec::StaticAlloc {
                mode,
                set,
                weights,
                gains,
                ..
            } => Outer::Static {
                mode: *mode,
                set: set.clone(),
                weights: *weights,
                gains: *gains,
            },
            ControllerSpec::ImpulseMpc { weights, gains, .. } => Outer::Impulse {
                weights: *weights,
                gains: *gains,
            },
            ControllerSpec::EnergyMpc {
                set,
                span,
                nodes,
                weights,
                gains,
                ..
            } => Outer::Energy {
                set: set.clone(),
                span: *span,
                nodes: *nodes,
                weights: *weights,
                gains: *gains,
                horizon: HorizonController::new(),
            },
        };
        let shooting_weights = match &cfg.controller {
            ControllerSpec::ImpulseMpc { weights, .. }
            | ControllerSpec::EnergyMpc { weights, .. } => *weights,
            _ => HorizonWeights::default(),
        };
        let realizer = match (&outer, &cfg.vehicle) {
            (Outer::None, _) => Realizer::Zero,
            (Outer::Impulse { .. }, VehicleSpec::Quad { params }) => {
                Realizer::Quad(Box::new(QuadMpc::new(
                    QuadPlant::new(params.clone(), None)?,
                    settings,
                    shooting_weights,
                    cfg.seed,
                )?))
            }
            (_, VehicleSpec::Quad { params }) => Realizer::Tracker {
                tracker: ForceTracker::default(),
                params: params.clone(),
            },
            (_, VehicleSpec::FixedWing { params, nominal }) => {
                let mut plant = FwPlant::new((**params).clone(), None, cfg.wind)?;
                if let Some(n) = nominal {
                    plant.nominal = *n;
                }
                Realizer::Fw(Box::new(FwMpc::new(
                    plant,
                    settings,
                    shooting_weights,
                    cfg.seed,
                )?))
            }
        };
        Ok(Self {
            outer,
            realizer,
            mass: cfg.vehicle.mass(),
            disturbance: cfg.disturbance,
            fault: cfg.fault,
            reference: cfg.reference.clone(),
            target: Vec3::zeros(),
            schedule: None,
            split: (
                Vec3::zeros(),
                Vec3::zeros(),
                Vec3::zeros(),
                CostTerms::default(),
            ),
        })
    }

    /// Faults are known to the controller from their onset on.
    fn known_fault(&self, t: f64) -> Option<FaultSpec> {
        self.fault.filter(|f| f.active(t))
    }

    fn pinned(&self, t: f64) -> [bool; 4] {
        let motor = self.known_fault(t).and_then(|f| f.motor()).map(|f| f.motor);
        std::array::from_fn(|i| motor == Some(i + 1))
    }

    /// Runs the shooting realizer toward `accel` (per node) from `state`.
    fn shoot(
        &mut self,
        state: &RigidBodyState,
        t: f64,
        accel: Vec3,
        disturbance: Option<Vec3>,
    ) -> Result<ShootingResult> {
        let fault = self.known_fault(t);
        let (nodes, horizon) = match &self.realizer {
            Realizer::Quad(m) => (m.settings.nodes, m.settings.horizon),
            Realizer::Fw(m) => (m.settings.nodes, m.settings.horizon),
            _ => unreachable!("shooting requested without a shooting realizer"),
        };
        let accel = vec![accel; nodes];
        let dist = disturbance.map(|d| vec![d; nodes]);
        let input = ShootingInput {
            state: *state,
            t0: t,
            accel: &accel,
            disturbance: dist.as_deref(),
        };
        let result = match &mut self.realizer {
            Realizer::Quad(m) => {
                m.plant.fault = fault.and_then(|f| f.motor());
                m.solve(&input)?
            }
            Realizer::Fw(m) => {
                m.plant.fault = fault.and_then(|f| f.wing());
                m.solve(&input)?
            }
            _ => unreachable!(),
        };
        self.schedule = Some((result.clone(), horizon / (nodes - 1) as f64));
        Ok(result)
    }

    fn update(&mut self, state: &RigidBodyState, t: f64) -> Result<Option<Update>> {
        let m = self.mass;
        let g = gravity();
        let (p_d, v_d) = self.reference.eval(t);
        let d = self.disturbance;
        let accel = |gains: &PdGains| desired_acceleration(&state.p, &state.v, &p_d, &v_d, gains);
        let update = match &mut self.outer {
            Outer::None => return Ok(None),
            Outer::Static {
                mode,
                set,
                weights,
                gains,
            } => {
                let mut prob =
                    AllocProblem::new(m, g, accel(gains), set.clone()).with_weights(*weights);
                prob.disturbance = d;
                let alloc = match (*mode, d.is_some()) {
                    (AllocMode::Lex, _) => solve_lexicographic(&prob)?,
                    (AllocMode::Weighted, false) => solve_weighted(&prob)?,
                    (AllocMode::Weighted, true) => solve_weighted_disturbed(&prob)?,
                };
                let targets = prob.targets()?;
                Update {
                    f_g: alloc.f_g_star,
                    f_t: alloc.f_t_star,
                    f_d: alloc.f_d,
                    cost: CostTerms {
                        gravity: weights.gravity * alloc.gravity_residual(&targets).powi(2),
                        tracking: weights.tracking * alloc.tracking_residual(&targets).powi(2),
                        energy: 0.0,
                    },
                    converged: true,
                }
            }
            Outer::Energy {
                set,
                span,
                nodes,
                weights,
                gains,
                horizon,
            } => {
                let grid = HeightGrid::new(state.p.z, *span, *nodes)?;
                let mut prob = HorizonProblem::energy(grid, m, g, accel(gains), set.clone())
                    .with_weights(*weights);
                prob.disturbance = d.map(|d| vec![d; *nodes]);
                let step = horizon.step(&prob)?;
                node_zero(&step.solution, energy_cost(&step.solution, &prob)?)
            }
            Outer::Impulse { weights, gains } => {
                let weights = *weights;
                let a_d = accel(gains);
                let result = self.shoot(state, t, a_d, d)?;
                let nodes = result.controls.len();
                let horizon = self
                    .schedule
                    .as_ref()
                    .map_or(0.0, |(_, h)| h * (nodes - 1) as f64);
                let mut prob = HorizonProblem::impulse(
                    HorizonGrid::new(t, horizon, nodes)?,
                    m,
                    g,
                    a_d,
                    FeasibleSet::ball(1.0),
                )
                .with_weights(weights);
                prob.disturbance = d.map(|d| vec![d; nodes]);
                let mut update =
                    node_zero(&result.solution, impulse_cost(&result.solution, &prob)?);
                update.converged = result.converged;
                return Ok(Some(update));
            }
        };
        self.realize_force(state, t, update.f_d)?;
        Ok(Some(update))
    }

    /// Hands a force target to the tracker, or turns it into an equivalent
    /// desired acceleration for the shooting realizer.
    fn realize_force(&mut self, state: &RigidBodyState, t: f64, f_d: Vec3) -> Result<()> {
        match self.realizer {
            Realizer::Tracker { .. } => {
                self.target = f_d;
                Ok(())
            }
            Realizer::Quad(_) | Realizer::Fw(_) => {
                let a_eff = gravity() + f_d / self.mass;
                self.shoot(state, t, a_eff, None).map(|_| ())
            }
            Realizer::Zero => Ok(()),
        }
    }

    /// Actuator command for the plant step starting at `t`, before faults.
    fn command(&self, state: &RigidBodyState, t: f64, dim: usize) -> Vec<f64> {
        match &self.realizer {
            Realizer::Zero => vec![0.0; dim],
            Realizer::Tracker { tracker, params } => tracker
                .command(state, &self.target, params, self.pinned(t))
                .0
                .to_vec(),
            Realizer::Quad(_) | Realizer::Fw(_) => match &self.schedule {
                Some((result, h)) => result.control_at(t, *h).to_vec(),
                None => vec![0.0; dim],
            },
        }
    }
}

fn node_zero(sol: &HorizonSolution, cost: CostTerms) -> Update {
    Update {
        f_g: sol.f_g[0],
        f_t: sol.f_t[0],
        f_d: sol.f_d[0],
        cost,
        converged: sol.converged,
    }
}

fn apply_fault(cmd: &mut [f64], fault: Option<FaultSpec>, t: f64) -> bool {
    match fault {
        Some(f @ FaultSpec::Motor { .. }) => {
            let motor = f.motor().expect("motor fault");
            let out =
                apply_motor_fault(&ThrustCommand([cmd[0], cmd[1], cmd[2], cmd[3]]), &motor, t);
            cmd.copy_from_slice(&out.0);
            motor.active(t)
        }
        Some(FaultSpec::WingLoss { onset }) => {
            let lost = t >= onset;
            if lost {
                cmd[1] = 0.0;
            }
            lost
        }
        None => false,
    }
}

/// Runs a scenario to its duration or to ground contact.
///
/// Time is `k dt` for integer step `k`; the controller updates every
/// `controller_period / dt` steps and the plant integrates with RK4 at `dt`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog> {
    cfg.validate()?;
    let plant = match &cfg.vehicle {
        VehicleSpec::Quad { params } => Plant::Quad {
            params: params.clone(),
            inertia_inv: params.inertia_inverse(),
        },
        VehicleSpec::FixedWing { params, .. } => Plant::Fw {
            params: params.clone(),
            inertia_inv: params.inertia_inverse(),
            wind: cfg.wind,
        },
    };
    let mut controller = Controller::new(cfg)?;
    let frame = FrameConvention::new(cfg.ground_offset);
    let dim = cfg.vehicle.control_dim();
    let steps = cfg.step_count();
    let period = cfg.period_steps();
    let accel_extra = cfg
        .disturbance
        .map_or_else(Vec3::zeros, |d| d / cfg.vehicle.mass());

    let mut log = SimLog {
        name: cfg.name.clone(),
        dt: cfg.dt,
        mass: cfg.vehicle.mass(),
        ground_offset: cfg.ground_offset,
        control_dim: dim,
        reference: cfg.reference.clone(),
        records: Vec::with_capacity(steps + 1),
        touchdown: None,
        termination: Termination::Duration,
        events: Vec::new(),
    };
    let mut state = cfg.initial_state;
    if cfg.stop_at_ground && frame.altitude(&state.p) <= 0.0 {
        log.touchdown = Some(Touchdown {
            t: 0.0,
            position: state.p,
            velocity: state.v,
        });
        log.termination = Termination::Ground;
    }
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        if k % period == 0 {
            match controller.update(&state, t) {
                Ok(Some(u)) => {
                    if !u.converged {
                        log.events.push(ControllerEvent {
                            t,
                            kind: EventKind::NotConverged,
                            message: "iteration cap reached".into(),
                        });
                    }
                    controller.split = (u.f_g, u.f_t, u.f_d, u.cost);
                }
                Ok(None) => {}
                Err(e) => log.events.push(ControllerEvent {
                    t,
                    kind: EventKind::Failed,
                    message: e.to_string(),
                }),
            }
        }
        let mut command = controller.command(&state, t, dim);
        let faulted = apply_fault(&mut command, cfg.fault, t);
        let (f_g, f_t, f_d, cost) = controller.split;
        log.records.push(StepRecord {
            t,
            state,
            command: command.clone(),
            f_g,
            f_t,
            f_d,
            cost,
            fault: faulted,
        });
        if k == steps || log.termination == Termination::Ground {
            break;
        }
        let next = match rk4_step(
            &state,
            |s| plant.derivative(s, &command, faulted, &accel_extra),
            cfg.dt,
        ) {
            Ok(next) => next,
            Err(source) => {
                log.termination = Termination::IntegrationError;
                return Err(SimError::Integration {
                    step: k,
                    time: t,
                    source,
                    log: Box::new(log),
                });
            }
        };
        if cfg.stop_at_ground {
            let (h0, h1) = (frame.altitude(&state.p), frame.altitude(&next.p));
            if h1 <= 0.0 {
                let s = h0 / (h0 - h1);
                log.touchdown = Some(Touchdown {
                    t: t + s * cfg.dt,
                    position: state.p + s * (next.p - state.p),
                    velocity: state.v + s * (next.v - state.v),
                });
                log.termination = Termination::Ground;
            }
        }
        state = next;
    }
    Ok(log)
}
