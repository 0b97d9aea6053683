//! Single-shooting receding-horizon control on the vehicle models.
//!
//! A candidate schedule holds one control vector per horizon node (zero-order
//! hold between nodes). It is rolled out through the plant with RK4 and the
//! force the plant actually produces at every node is scored with the impulse
//! cost, the gravity/tracking split being optimal in closed form. Sensitivities
//! come from central finite differences; the schedule is improved by
//! projected gradient with Armijo backtracking on range-normalized controls.

use gcf_core::{
    gravity, FeasibleSet, HorizonGrid, HorizonProblem, HorizonSolution, HorizonWeights,
    ScheduleCost, Vec3, TOL,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VehicleError};
use crate::fixedwing::{fw_derivative_with, fw_wrench, FwParams, SurfaceCommand, WingLossFault};
use crate::quad::{
    allocate_thrust, quad_derivative_with, quad_force, MotorFault, QuadParams, ThrustCommand,
};
use crate::state::{rk4_step, RigidBodyState, StateDerivative};

/// A plant the shooting solver can roll out.
pub trait ShootingPlant {
    fn control_dim(&self) -> usize;
    /// Bounds on the control applied from time `t`; equal bounds pin a channel.
    fn bounds(&self, t: f64) -> (Vec<f64>, Vec<f64>);
    fn derivative(&self, s: &RigidBodyState, u: &[f64], t: f64) -> StateDerivative;
    /// Earth-frame force the plant produces.
    fn force(&self, s: &RigidBodyState, u: &[f64], t: f64) -> Vec3;
    fn mass(&self) -> f64;
    /// A control that roughly produces `target` from `s`.
    fn nominal(&self, s: &RigidBodyState, target: &Vec3, t: f64) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcSettings {
    /// Horizon length, s.
    pub horizon: f64,
    pub nodes: usize,
    /// Integration step inside rollouts, s.
    pub substep: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
    /// Stationarity tolerance on the normalized projected gradient, relative
    /// to `1 + objective`.
    pub tolerance: f64,
    /// Relative size of the random restart perturbation.
    pub jitter: f64,
    pub restarts: bool,
}

impl Default for MpcSettings {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            nodes: 10,
            substep: 0.01,
            max_iterations: 30,
            fd_step: 1e-5,
            tolerance: 1e-6,
            jitter: 0.05,
            restarts: true,
        }
    }
}

impl MpcSettings {
    pub fn validate(&self) -> Result<()> {
        HorizonGrid::new(0.0, self.horizon, self.nodes)?;
        let ok =
            self.substep > 0.0 && self.fd_step > 0.0 && self.tolerance > 0.0 && self.jitter >= 0.0;
        if ok && self.max_iterations > 0 {
            Ok(())
        } else {
            Err(VehicleError::InvalidParams(format!(
                "invalid MPC settings {self:?}"
            )))
        }
    }
}

/// Data for one receding-horizon solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingInput<'a> {
    pub state: RigidBodyState,
    pub t0: f64,
    /// Desired acceleration per node.
    pub accel: &'a [Vec3],
    pub disturbance: Option<&'a [Vec3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingResult {
    /// Control vector per node.
    pub controls: Vec<Vec<f64>>,
    /// Realized forces and their optimal split.
    pub solution: HorizonSolution,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iterate of the winning start.
    pub trace: Vec<f64>,
    pub t0: f64,
}

impl ShootingResult {
    pub fn objective(&self) -> f64 {
        self.solution.objective
    }

    /// Control of the node in force at time `t` (zero-order hold).
    pub fn control_at(&self, t: f64, dt_node: f64) -> &[f64] {
        let n = self.controls.len();
        let k = ((t - self.t0) / dt_node).floor();
        let i = if k.is_finite() && k > 0.0 {
            (k as usize).min(n - 1)
        } else {
            0
        };
        &self.controls[i]
    }
}

struct Layout {
    grid: HorizonGrid,
    k: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    substeps: usize,
    h_sub: f64,
}

impl Layout {
    fn new<P: ShootingPlant>(plant: &P, settings: &MpcSettings, t0: f64) -> Result<Self> {
        let grid = HorizonGrid::new(t0, settings.horizon, settings.nodes)?;
        let k = plant.control_dim();
        let mut lo = Vec::with_capacity(k * grid.nodes);
        let mut hi = Vec::with_capacity(k * grid.nodes);
        for i in 0..grid.nodes {
            let (l, h) = plant.bounds(grid.time(i));
            lo.extend(l);
            hi.extend(h);
        }
        let substeps = (grid.dt() / settings.substep).ceil().max(1.0) as usize;
        Ok(Self {
            h_sub: grid.dt() / substeps as f64,
            grid,
            k,
            lo,
            hi,
            substeps,
        })
    }

    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    fn free(&self, i: usize) -> bool {
        self.hi[i] > self.lo[i]
    }

    fn range(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }
}

struct Shooter<'a, P: ShootingPlant> {
    plant: &'a P,
    layout: Layout,
    cost: ScheduleCost<'a>,
    state0: RigidBodyState,
    fd_step: f64,
}

impl<P: ShootingPlant> Shooter<'_, P> {
    fn node(&self, i: usize) -> std::ops::Range<usize> {
        i * self.layout.k..(i + 1) * self.layout.k
    }

    /// Rolls out from node `start` (whose state is `s`) and writes states and
    /// forces for nodes `start..N`.
    fn rollout_from(
        &self,
        x: &[f64],
        start: usize,
        s: RigidBodyState,
        states: &mut [RigidBodyState],
        forces: &mut [Vec3],
    ) -> Result<()> {
        let n = self.layout.grid.nodes;
        let mut s = s;
        for i in start..n {
            let t = self.layout.grid.time(i);
            let u = &x[self.node(i)];
            states[i] = s;
            forces[i] = self.plant.force(&s, u, t);
            if i + 1 < n {
                for j in 0..self.layout.substeps {
                    let tj = t + j as f64 * self.layout.h_sub;
                    s = rk4_step(&s, |y| self.plant.derivative(y, u, tj), self.layout.h_sub)?;
                }
            }
        }
        Ok(())
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<RigidBodyState>, Vec<Vec3>)> {
        let n = self.layout.grid.nodes;
        let mut states = vec![self.state0; n];
        let mut forces = vec![Vec3::zeros(); n];
        self.rollout_from(x, 0, self.state0, &mut states, &mut forces)?;
        Ok((self.cost.value(&forces), states, forces))
    }

    fn gradient(&self, x: &[f64], states: &[RigidBodyState], forces: &[Vec3]) -> Result<Vec<f64>> {
        let n = self.layout.grid.nodes;
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        let mut st = states.to_vec();
        let mut fp = forces.to_vec();
        for i in 0..n {
            for c in self.node(i) {
                if !self.layout.free(c) {
                    continue;
                }
                let h = self.fd_step;
                xp[c] = x[c] + h;
                self.rollout_from(&xp, i, states[i], &mut st, &mut fp)?;
                let up = self.cost.value(&fp);
                xp[c] = x[c] - h;
                self.rollout_from(&xp, i, states[i], &mut st, &mut fp)?;
                let down = self.cost.value(&fp);
                xp[c] = x[c];
                g[c] = (up - down) / (2.0 * h);
            }
            fp[i..].copy_from_slice(&forces[i..]);
        }
        Ok(g)
    }

    fn descend(&self, start: Vec<f64>, max_iter: usize, tolerance: f64) -> Result<Run> {
        let lay = &self.layout;
        let mut x = start;
        lay.project(&mut x);
        let (mut f, mut states, mut forces) = self.evaluate(&x)?;
        let mut trace = vec![f];
        let mut step = f64::NAN;
        let mut iterations = 0;
        let mut stationary = false;
        for _ in 0..max_iter {
            let g = self.gradient(&x, &states, &forces)?;
            // Gradient with respect to range-normalized controls.
            let gz: Vec<f64> = (0..x.len())
                .map(|i| {
                    if lay.free(i) {
                        g[i] * lay.range(i)
                    } else {
                        0.0
                    }
                })
                .collect();
            let pg = (0..x.len())
                .filter(|&i| lay.free(i))
                .map(|i| {
                    let z = (x[i] - lay.lo[i]) / lay.range(i);
                    ((z - gz[i]).clamp(0.0, 1.0) - z).abs()
                })
                .fold(0.0, f64::max);
            if pg <= tolerance * (1.0 + f.abs()) {
                stationary = true;
                break;
            }
            let gmax = gz.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !step.is_finite() {
                step = 0.25 / gmax.max(f64::MIN_POSITIVE);
            }
            let mut accepted = None;
            for _ in 0..40 {
                let mut trial: Vec<f64> = (0..x.len())
                    .map(|i| x[i] - step * gz[i] * lay.range(i))
                    .collect();
                lay.project(&mut trial);
                let decrease: f64 = (0..x.len()).map(|i| g[i] * (trial[i] - x[i])).sum();
                let (ft, st, fo) = self.evaluate(&trial)?;
                if ft <= f + 1e-4 * decrease && ft <= f {
                    accepted = Some((trial, ft, st, fo));
                    break;
                }
                step *= 0.5;
            }
            let Some((xn, fnew, st, fo)) = accepted else {
                break;
            };
            iterations += 1;
            let rel = (f - fnew) / (1.0 + f.abs());
            x = xn;
            f = fnew;
            states = st;
            forces = fo;
            trace.push(f);
            step *= 2.0;
            if rel <= TOL.horizon_rel {
                stationary = true;
                break;
            }
        }
        Ok(Run {
            x,
            value: f,
            forces,
            iterations,
            converged: stationary,
            trace,
        })
    }
}

struct Run {
    x: Vec<f64>,
    value: f64,
    forces: Vec<Vec3>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Optimizes a control schedule from each of `starts` and returns the best.
pub fn solve_shooting<P: ShootingPlant>(
    plant: &P,
    input: &ShootingInput,
    settings: &MpcSettings,
    weights: &HorizonWeights,
    starts: &[Vec<Vec<f64>>],
) -> Result<ShootingResult> {
    settings.validate()?;
    let layout = Layout::new(plant, settings, input.t0)?;
    let n = layout.grid.nodes;
    if input.accel.len() != n || input.disturbance.is_some_and(|d| d.len() != n) {
        return Err(
            gcf_core::CoreError::GridMismatch(format!("expected {n} samples per node")).into(),
        );
    }
    if starts.is_empty() {
        return Err(VehicleError::InvalidParams("no starting schedule".into()));
    }
    let mut problem = HorizonProblem::impulse(
        layout.grid,
        plant.mass(),
        gravity(),
        Vec3::zeros(),
        FeasibleSet::ball(1.0),
    )
    .with_weights(*weights);
    problem.accel_desired = input.accel.to_vec();
    problem.disturbance = input.disturbance.map(|d| d.to_vec());
    problem.validate()?;
    let cost = ScheduleCost::new(&problem)?;
    let shooter = Shooter {
        plant,
        layout,
        cost,
        state0: input.state,
        fd_step: settings.fd_step,
    };

    let mut best: Option<Run> = None;
    for start in starts {
        if start.len() != n || start.iter().any(|u| u.len() != shooter.layout.k) {
            return Err(VehicleError::InvalidParams(
                "starting schedule has the wrong shape".into(),
            ));
        }
        let run = shooter.descend(start.concat(), settings.max_iterations, settings.tolerance)?;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let run = best.expect("non-empty starts");
    let mut solution = shooter.cost.solution(&run.forces)?;
    solution.iterations = run.iterations;
    solution.converged = run.converged;
    solution.trace = run.trace.clone();
    Ok(ShootingResult {
        controls: run
            .x
            .chunks(shooter.layout.k)
            .map(<[f64]>::to_vec)
            .collect(),
        solution,
        iterations: run.iterations,
        converged: run.converged,
        trace: run.trace,
        t0: input.t0,
    })
}

/// Quadcopter seen by the shooting solver: one thrust per motor.
#[derive(Debug, Clone)]
pub struct QuadPlant {
    pub params: QuadParams,
    pub fault: Option<MotorFault>,
    inertia_inv: gcf_core::Mat3,
}

impl QuadPlant {
    pub fn new(params: QuadParams, fault: Option<MotorFault>) -> Result<Self> {
        params.validate()?;
        if let Some(f) = &fault {
            f.validate()?;
        }
        Ok(Self {
            inertia_inv: params.inertia_inverse(),
            params,
            fault,
        })
    }

    fn pinned(&self, t: f64) -> [bool; 4] {
        std::array::from_fn(|i| self.fault.is_some_and(|f| f.active(t) && f.motor == i + 1))
    }
}

impl ShootingPlant for QuadPlant {
    fn control_dim(&self) -> usize {
        4
    }

    fn bounds(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let pinned = self.pinned(t);
        let hi = (0..4)
            .map(|i| {
                if pinned[i] {
                    0.0
                } else {
                    self.params.max_thrust
                }
            })
            .collect();
        (vec![0.0; 4], hi)
    }

    fn derivative(&self, s: &RigidBodyState, u: &[f64], _t: f64) -> StateDerivative {
        quad_derivative_with(
            s,
            &ThrustCommand([u[0], u[1], u[2], u[3]]),
            &self.params,
            &self.inertia_inv,
        )
    }

    fn force(&self, s: &RigidBodyState, u: &[f64], _t: f64) -> Vec3 {
        quad_force(s, &ThrustCommand([u[0], u[1], u[2], u[3]]))
    }

    fn mass(&self) -> f64 {
        self.params.mass
    }

    fn nominal(&self, _s: &RigidBodyState, target: &Vec3, t: f64) -> Vec<f64> {
        allocate_thrust(target.norm(), &Vec3::zeros(), &self.params, self.pinned(t))
            .0
            .to_vec()
    }
}

/// Fixed-wing aircraft seen by the shooting solver, controls in
/// [`SurfaceCommand::to_array`] order.
#[derive(Debug, Clone)]
pub struct FwPlant {
    pub params: FwParams,
    pub fault: Option<WingLossFault>,
    pub wind: Vec3,
    /// Command used to seed cold starts.
    pub nominal: SurfaceCommand,
    inertia_inv: gcf_core::Mat3,
}

impl FwPlant {
    pub fn new(params: FwParams, fault: Option<WingLossFault>, wind: Vec3) -> Result<Self> {
        params.validate()?;
        if let Some(f) = &fault {
            f.validate()?;
        }
        Ok(Self {
            inertia_inv: params.inertia_inverse(),
            params,
            fault,
            wind,
            nominal: SurfaceCommand {
                delta_t: 0.5,
                ..SurfaceCommand::default()
            },
        })
    }

    pub fn wing_lost(&self, t: f64) -> bool {
        self.fault.is_some_and(|f| f.active(t))
    }
}

impl ShootingPlant for FwPlant {
    fn control_dim(&self) -> usize {
        5
    }

    fn bounds(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = self.params.command_bounds();
        if self.wing_lost(t) {
            lo[1] = 0.0;
            hi[1] = 0.0;
        }
        (lo.to_vec(), hi.to_vec())
    }

    fn derivative(&self, s: &RigidBodyState, u: &[f64], t: f64) -> StateDerivative {
        let cmd = SurfaceCommand::from_slice(u);
        fw_derivative_with(
            s,
            &cmd,
            &self.params,
            &self.inertia_inv,
            &self.wind,
            self.wing_lost(t),
        )
    }

    fn force(&self, s: &RigidBodyState, u: &[f64], t: f64) -> Vec3 {
        fw_wrench(
            s,
            &SurfaceCommand::from_slice(u),
            &self.params,
            &self.wind,
            self.wing_lost(t),
        )
        .force
    }

    fn mass(&self) -> f64 {
        self.params.mass
    }

    fn nominal(&self, _s: &RigidBodyState, _target: &Vec3, t: f64) -> Vec<f64> {
        let (lo, hi) = self.bounds(t);
        self.nominal
            .to_array()
            .iter()
            .enumerate()
            .map(|(i, v)| v.clamp(lo[i], hi[i]))
            .collect()
    }
}

/// Receding-horizon controller around [`solve_shooting`] holding the previous
/// schedule for warm starts. One caller per instance.
#[derive(Debug, Clone)]
pub struct ShootingMpc<P: ShootingPlant> {
    pub plant: P,
    pub settings: MpcSettings,
    pub weights: HorizonWeights,
    previous: Option<ShootingResult>,
    rng: ChaCha8Rng,
}

impl<P: ShootingPlant> ShootingMpc<P> {
    pub fn new(
        plant: P,
        settings: MpcSettings,
        weights: HorizonWeights,
        seed: u64,
    ) -> Result<Self> {
        settings.validate()?;
        weights.validate()?;
        Ok(Self {
            plant,
            settings,
            weights,
            previous: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    fn node_dt(&self) -> f64 {
        self.settings.horizon / (self.settings.nodes - 1) as f64
    }

    /// Deterministic cold schedule: each node asks for the force the
    /// reference demands.
    pub fn cold_start(&self, input: &ShootingInput) -> Vec<Vec<f64>> {
        let h = self.node_dt();
        let m = self.plant.mass();
        input
            .accel
            .iter()
            .enumerate()
            .map(|(i, a)| {
                self.plant.nominal(
                    &input.state,
                    &(m * (a - gravity())),
                    input.t0 + i as f64 * h,
                )
            })
            .collect()
    }

    pub fn solve(&mut self, input: &ShootingInput) -> Result<ShootingResult> {
        let h = self.node_dt();
        let n = self.settings.nodes;
        let cold = self.cold_start(input);
        let warm: Option<Vec<Vec<f64>>> = self.previous.as_ref().map(|prev| {
            (0..n)
                .map(|i| prev.control_at(input.t0 + i as f64 * h, h).to_vec())
                .collect()
        });
        let mut starts = Vec::with_capacity(3);
        if let Some(w) = &warm {
            starts.push(w.clone());
        }
        if self.settings.restarts || warm.is_none() {
            starts.push(cold.clone());
        }
        if self.settings.restarts {
            let base = warm.unwrap_or(cold);
            let jitter = self.settings.jitter;
            let jittered = base
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let (lo, hi) = self.plant.bounds(input.t0 + i as f64 * h);
                    u.iter()
                        .enumerate()
                        .map(|(c, v)| {
                            let noise: f64 = self.rng.random_range(-1.0..1.0);
                            (v + jitter * noise * (hi[c] - lo[c])).clamp(lo[c], hi[c])
                        })
                        .collect()
                })
                .collect();
            starts.push(jittered);
        }
        let result = solve_shooting(&self.plant, input, &self.settings, &self.weights, &starts)?;
        self.previous = Some(result.clone());
        Ok(result)
    }
}

pub type QuadMpc = ShootingMpc<QuadPlant>;
pub type FwMpc = ShootingMpc<FwPlant>;

/// One quadcopter shooting solve from a cold start (no warm-start history).
pub fn quad_gcf_mpc(
    params: &QuadParams,
    fault: Option<MotorFault>,
    input: &ShootingInput,
    settings: &MpcSettings,
    weights: &HorizonWeights,
) -> Result<ShootingResult> {
    let mut mpc = QuadMpc::new(
        QuadPlant::new(params.clone(), fault)?,
        *settings,
        *weights,
        0,
    )?;
    mpc.solve(input)
}

/// One fixed-wing shooting solve from a cold start seeded at `nominal`.
pub fn fw_gcf_mpc(
    params: &FwParams,
    fault: Option<WingLossFault>,
    wind: Vec3,
    nominal: SurfaceCommand,
    input: &ShootingInput,
    settings: &MpcSettings,
    weights: &HorizonWeights,
) -> Result<ShootingResult> {
    let mut plant = FwPlant::new(params.clone(), fault, wind)?;
    plant.nominal = nominal;
    let mut mpc = FwMpc::new(plant, *settings, *weights, 0)?;
    mpc.solve(input)
}
