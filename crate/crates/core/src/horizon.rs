//! Receding-horizon gravity-compensation-first costs and solver.
//!
//! Schedules are sampled on `N` uniform nodes spanning the whole horizon
//! (both ends included) and integrated with the trapezoid rule. Two
//! viewpoints are supported:
//!
//! * impulse, on a [`HorizonGrid`] in time:
//!   `w_g‖∫(f_g - t_g)dt‖² + w_t‖∫(f_t - t_t)dt‖² + w_e∫‖f_d‖²dt`
//! * energy, on a [`HeightGrid`] along the descent:
//!   `w_g(∫(f_g - t_g)ᵀdh)² + w_t(∫(f_t - t_t)ᵀdh)² + w_e(∫f_dᵀdh)²`
//!
//! Only the net integrals are penalised, so a solution may run a deficit early
//! and a surplus late.

use serde::{Deserialize, Serialize};

use crate::disturbance::decompose_disturbance;
use crate::error::{CoreError, Result};
use crate::feasible::FeasibleSet;
use crate::math::{check_finite, Vec3};
use crate::tolerances::TOL;

/// Uniform time nodes `t0 + i·T/(N-1)`, `i = 0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonGrid {
    pub t0: f64,
    pub length: f64,
    pub nodes: usize,
}

impl Default for HorizonGrid {
    fn default() -> Self {
        Self {
            t0: 0.0,
            length: 2.0,
            nodes: 20,
        }
    }
}

impl HorizonGrid {
    pub fn new(t0: f64, length: f64, nodes: usize) -> Result<Self> {
        let g = Self { t0, length, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length > 0.0 && self.length.is_finite() && self.nodes >= 2 && self.t0.is_finite() {
            Ok(())
        } else {
            Err(CoreError::InvalidProblem(format!(
                "horizon needs T > 0 and N >= 2, got T={} N={}",
                self.length, self.nodes
            )))
        }
    }

    /// Node spacing.
    pub fn dt(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt()
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.nodes, self.dt())
    }
}

/// Uniform earth-frame z nodes `h0 + i·H/(N-1)` along a descent (z points down,
/// so increasing z is losing altitude).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightGrid {
    pub h0: f64,
    pub span: f64,
    pub nodes: usize,
}

impl HeightGrid {
    pub fn new(h0: f64, span: f64, nodes: usize) -> Result<Self> {
        let g = Self { h0, span, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.span > 0.0 && self.span.is_finite() && self.nodes >= 2 && self.h0.is_finite() {
            Ok(())
        } else {
            Err(CoreError::InvalidProblem(format!(
                "height grid needs H > 0 and N >= 2, got H={} N={}",
                self.span, self.nodes
            )))
        }
    }

    pub fn dh(&self) -> f64 {
        self.span / (self.nodes - 1) as f64
    }

    pub fn height(&self, i: usize) -> f64 {
        self.h0 + i as f64 * self.dh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    Time(HorizonGrid),
    Height(HeightGrid),
}

impl Grid {
    pub fn nodes(&self) -> usize {
        match self {
            Grid::Time(g) => g.nodes,
            Grid::Height(g) => g.nodes,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Grid::Time(g) => g.validate(),
            Grid::Height(g) => g.validate(),
        }
    }
}

/// A sampled vertical trajectory the energy integrals are evaluated along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentTrajectory {
    pub times: Vec<f64>,
    pub heights: Vec<f64>,
    pub vz: Vec<f64>,
}

impl DescentTrajectory {
    /// Constant descent rate through the nodes of `grid`.
    pub fn constant_rate(grid: &HeightGrid, rate: f64) -> Self {
        let heights: Vec<f64> = (0..grid.nodes).map(|i| grid.height(i)).collect();
        let times = heights.iter().map(|h| (h - grid.h0) / rate).collect();
        Self {
            times,
            heights,
            vz: vec![rate; grid.nodes],
        }
    }

    /// Quadrature weights for `∫ x dh = ∫ x v_z dt` (trapezoid in time).
    fn weights(&self) -> Result<Vec<f64>> {
        let n = self.times.len();
        if self.heights.len() != n || self.vz.len() != n {
            return Err(CoreError::GridMismatch(
                "trajectory arrays have different lengths".into(),
            ));
        }
        for i in 1..n {
            if self.heights[i].partial_cmp(&self.heights[i - 1])
                != Some(std::cmp::Ordering::Greater)
            {
                return Err(CoreError::NonMonotoneHeight { index: i });
            }
        }
        let mut w = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let dt = self.times[i + 1] - self.times[i];
            w[i] += 0.5 * dt * self.vz[i];
            w[i + 1] += 0.5 * dt * self.vz[i + 1];
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonWeights {
    pub gravity: f64,
    pub tracking: f64,
    pub energy: f64,
}

impl Default for HorizonWeights {
    fn default() -> Self {
        Self {
            gravity: 1e4,
            tracking: 1e2,
            energy: 1.0,
        }
    }
}

impl HorizonWeights {
    /// `w_g > w_t > w_e ≥ 0`. A zero energy weight is accepted for the
    /// degenerate net-impulse-only problem.
    pub fn validate(&self) -> Result<()> {
        if self.gravity > self.tracking
            && self.tracking > self.energy
            && self.energy >= 0.0
            && self.gravity.is_finite()
        {
            Ok(())
        } else {
            Err(CoreError::InvalidProblem(format!(
                "weights must satisfy w_g > w_t > w_e >= 0, got {self:?}"
            )))
        }
    }

    /// Weight left on the combined residual once `f_g` is eliminated.
    fn reduced(&self) -> f64 {
        self.gravity * self.tracking / (self.gravity + self.tracking)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonProblem {
    pub grid: Grid,
    pub weights: HorizonWeights,
    pub mass: f64,
    pub gravity: Vec3,
    /// Desired acceleration at each node.
    pub accel_desired: Vec<Vec3>,
    /// Optional disturbance estimate at each node.
    pub disturbance: Option<Vec<Vec3>>,
    /// Either one set shared by every node or one per node.
    pub sets: Vec<FeasibleSet>,
    /// Energy viewpoint only: trajectory the work integrals follow. When
    /// absent a constant descent rate is assumed.
    pub descent: Option<DescentTrajectory>,
    pub max_iterations: usize,
}

/// Descent rate assumed when an energy problem has no trajectory attached.
/// Any positive value yields the same trapezoid-in-height weights.
pub const DEFAULT_DESCENT_RATE: f64 = 1.0;

impl HorizonProblem {
    /// Impulse-viewpoint problem with a constant desired acceleration and a
    /// single feasible set.
    pub fn impulse(
        grid: HorizonGrid,
        mass: f64,
        gravity: Vec3,
        accel_desired: Vec3,
        set: FeasibleSet,
    ) -> Self {
        Self {
            grid: Grid::Time(grid),
            weights: HorizonWeights::default(),
            mass,
            gravity,
            accel_desired: vec![accel_desired; grid.nodes],
            disturbance: None,
            sets: vec![set],
            descent: None,
            max_iterations: TOL.horizon_iters,
        }
    }

    pub fn energy(
        grid: HeightGrid,
        mass: f64,
        gravity: Vec3,
        accel_desired: Vec3,
        set: FeasibleSet,
    ) -> Self {
        Self {
            grid: Grid::Height(grid),
            weights: HorizonWeights::default(),
            mass,
            gravity,
            accel_desired: vec![accel_desired; grid.nodes],
            disturbance: None,
            sets: vec![set],
            descent: None,
            max_iterations: TOL.horizon_iters,
        }
    }

    pub fn with_weights(mut self, weights: HorizonWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    pub fn set_at(&self, i: usize) -> &FeasibleSet {
        if self.sets.len() == 1 {
            &self.sets[0]
        } else {
            &self.sets[i]
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.weights.validate()?;
        let n = self.nodes();
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(CoreError::InvalidProblem(format!(
                "mass {} must be positive",
                self.mass
            )));
        }
        check_finite("gravity", &self.gravity)?;
        if self.gravity.norm() == 0.0 {
            return Err(CoreError::Domain("gravity vector has zero length".into()));
        }
        if self.accel_desired.len() != n {
            return Err(CoreError::GridMismatch(format!(
                "{} desired accelerations for {n} nodes",
                self.accel_desired.len()
            )));
        }
        self.accel_desired
            .iter()
            .try_for_each(|a| check_finite("desired acceleration", a))?;
        if let Some(d) = &self.disturbance {
            if d.len() != n {
                return Err(CoreError::GridMismatch(format!(
                    "{} disturbances for {n} nodes",
                    d.len()
                )));
            }
        }
        if self.sets.len() != 1 && self.sets.len() != n {
            return Err(CoreError::GridMismatch(format!(
                "{} feasible sets for {n} nodes",
                self.sets.len()
            )));
        }
        self.sets.iter().try_for_each(FeasibleSet::validate)?;
        if let Some(traj) = &self.descent {
            if traj.times.len() != n {
                return Err(CoreError::GridMismatch(format!(
                    "trajectory has {} samples for {n} nodes",
                    traj.times.len()
                )));
            }
        }
        Ok(())
    }

    /// Per-node `(gravity target, tracking target)` with any disturbance
    /// folded in.
    pub fn targets(&self) -> Result<Vec<(Vec3, Vec3)>> {
        let mg = self.mass * self.gravity;
        (0..self.nodes())
            .map(|i| {
                let mad = self.mass * self.accel_desired[i];
                match &self.disturbance {
                    None => Ok((mg, mad)),
                    Some(d) => {
                        let (along, across) = decompose_disturbance(&d[i], &self.gravity)?;
                        Ok((mg + along, mad - across))
                    }
                }
            })
            .collect()
    }

    /// Quadrature weights of the grid's integrals.
    pub fn quadrature(&self) -> Result<Vec<f64>> {
        match &self.grid {
            Grid::Time(g) => Ok(g.weights()),
            Grid::Height(g) => match &self.descent {
                Some(traj) => traj.weights(),
                None => DescentTrajectory::constant_rate(g, DEFAULT_DESCENT_RATE).weights(),
            },
        }
    }
}

fn trapezoid_weights(n: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; n];
    w[0] = 0.5 * step;
    w[n - 1] = 0.5 * step;
    w
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonSolution {
    pub f_g: Vec<Vec3>,
    pub f_t: Vec<Vec3>,
    pub f_d: Vec<Vec3>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iterate of the winning start.
    pub trace: Vec<f64>,
    /// Descent rate assumed for energy problems without a trajectory.
    pub descent_rate: Option<f64>,
}

impl HorizonSolution {
    /// A solution assembled from explicit schedules; `f_d = -f_g + f_t`.
    pub fn from_schedules(f_g: Vec<Vec3>, f_t: Vec<Vec3>) -> Self {
        let f_d = f_g.iter().zip(&f_t).map(|(g, t)| -g + t).collect();
        Self {
            f_g,
            f_t,
            f_d,
            objective: f64::NAN,
            iterations: 0,
            converged: false,
            trace: Vec::new(),
            descent_rate: None,
        }
    }

    pub fn nodes(&self) -> usize {
        self.f_d.len()
    }

    /// Drops node 0 and repeats the last node, for warm-starting the next
    /// receding-horizon solve.
    pub fn shifted(&self) -> Self {
        let shift = |v: &[Vec3]| -> Vec<Vec3> {
            let mut out: Vec<Vec3> = v.iter().skip(1).copied().collect();
            out.push(*v.last().expect("non-empty schedule"));
            out
        };
        Self {
            f_g: shift(&self.f_g),
            f_t: shift(&self.f_t),
            f_d: shift(&self.f_d),
            ..self.clone()
        }
    }
}

/// The three weighted terms of a horizon cost.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostTerms {
    pub gravity: f64,
    pub tracking: f64,
    pub energy: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.gravity + self.tracking + self.energy
    }
}

fn check_schedule(sol: &HorizonSolution, n: usize) -> Result<()> {
    if sol.f_g.len() != n || sol.f_t.len() != n || sol.f_d.len() != n {
        return Err(CoreError::GridMismatch(format!(
            "solution has {}/{}/{} nodes, problem has {n}",
            sol.f_g.len(),
            sol.f_t.len(),
            sol.f_d.len()
        )));
    }
    Ok(())
}

/// Impulse-viewpoint cost of a schedule. The energy term integrates
/// `‖-f_g + f_t‖²`.
pub fn impulse_cost(sol: &HorizonSolution, prob: &HorizonProblem) -> Result<CostTerms> {
    if !matches!(prob.grid, Grid::Time(_)) {
        return Err(CoreError::GridMismatch(
            "impulse cost needs a time grid".into(),
        ));
    }
    let n = prob.nodes();
    check_schedule(sol, n)?;
    let c = prob.quadrature()?;
    let targets = prob.targets()?;
    let mut rg = Vec3::zeros();
    let mut rt = Vec3::zeros();
    let mut e = 0.0;
    for i in 0..n {
        let (tg, tt) = targets[i];
        rg += c[i] * (sol.f_g[i] - tg);
        rt += c[i] * (sol.f_t[i] - tt);
        e += c[i] * (-sol.f_g[i] + sol.f_t[i]).norm_squared();
    }
    let w = &prob.weights;
    Ok(CostTerms {
        gravity: w.gravity * rg.norm_squared(),
        tracking: w.tracking * rt.norm_squared(),
        energy: w.energy * e,
    })
}

/// Energy-viewpoint cost: every integral is a work scalar along the vertical.
pub fn energy_cost(sol: &HorizonSolution, prob: &HorizonProblem) -> Result<CostTerms> {
    if !matches!(prob.grid, Grid::Height(_)) {
        return Err(CoreError::GridMismatch(
            "energy cost needs a height grid".into(),
        ));
    }
    let n = prob.nodes();
    check_schedule(sol, n)?;
    let c = prob.quadrature()?;
    let targets = prob.targets()?;
    let (mut wg, mut wt, mut we) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (tg, tt) = targets[i];
        wg += c[i] * (sol.f_g[i].z - tg.z);
        wt += c[i] * (sol.f_t[i].z - tt.z);
        we += c[i] * (-sol.f_g[i].z + sol.f_t[i].z);
    }
    let w = &prob.weights;
    Ok(CostTerms {
        gravity: w.gravity * wg * wg,
        tracking: w.tracking * wt * wt,
        energy: w.energy * we * we,
    })
}

/// Cost terms under whichever viewpoint the problem's grid implies.
pub fn horizon_cost(sol: &HorizonSolution, prob: &HorizonProblem) -> Result<CostTerms> {
    match prob.grid {
        Grid::Time(_) => impulse_cost(sol, prob),
        Grid::Height(_) => energy_cost(sol, prob),
    }
}

/// Horizon objective as a function of the commanded forces `u_i = f_d,i`,
/// with the optimal `(f_g, f_t)` split taken in closed form.
pub struct ScheduleCost<'a> {
    prob: &'a HorizonProblem,
    c: Vec<f64>,
    targets: Vec<(Vec3, Vec3)>,
    /// `Σ c_i (t_t,i - t_g,i)`
    demand: Vec3,
    kappa: f64,
    lipschitz: f64,
    energy_view: bool,
}

impl<'a> ScheduleCost<'a> {
    pub fn new(prob: &'a HorizonProblem) -> Result<Self> {
        let c = prob.quadrature()?;
        let targets = prob.targets()?;
        let energy_view = matches!(prob.grid, Grid::Height(_));
        let mut demand = Vec3::zeros();
        for (ci, (tg, tt)) in c.iter().zip(&targets) {
            demand += *ci * (tt - tg);
        }
        let total: f64 = c.iter().sum();
        if total.abs() <= f64::EPSILON {
            return Err(CoreError::Domain("quadrature weights sum to zero".into()));
        }
        let kappa = prob.weights.reduced();
        let we = prob.weights.energy;
        let c2: f64 = c.iter().map(|x| x * x).sum();
        let cmax = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lipschitz = if energy_view {
            2.0 * (kappa + we) * c2
        } else {
            2.0 * kappa * c2 + 2.0 * we * cmax
        };
        Ok(Self {
            prob,
            c,
            targets,
            demand,
            kappa,
            lipschitz,
            energy_view,
        })
    }

    fn weighted_sum(&self, u: &[Vec3]) -> Vec3 {
        self.c
            .iter()
            .zip(u)
            .fold(Vec3::zeros(), |acc, (ci, ui)| acc + *ci * ui)
    }

    pub fn value(&self, u: &[Vec3]) -> f64 {
        let sum = self.weighted_sum(u);
        let we = self.prob.weights.energy;
        if self.energy_view {
            let r = sum.z - self.demand.z;
            self.kappa * r * r + we * sum.z * sum.z
        } else {
            let e: f64 = self
                .c
                .iter()
                .zip(u)
                .map(|(ci, ui)| ci * ui.norm_squared())
                .sum();
            self.kappa * (sum - self.demand).norm_squared() + we * e
        }
    }

    fn gradient(&self, u: &[Vec3]) -> Vec<Vec3> {
        let sum = self.weighted_sum(u);
        let we = self.prob.weights.energy;
        if self.energy_view {
            let g = 2.0 * self.kappa * (sum.z - self.demand.z) + 2.0 * we * sum.z;
            self.c
                .iter()
                .map(|ci| Vec3::new(0.0, 0.0, ci * g))
                .collect()
        } else {
            let common = 2.0 * self.kappa * (sum - self.demand);
            self.c
                .iter()
                .zip(u)
                .map(|(ci, ui)| *ci * (common + 2.0 * we * ui))
                .collect()
        }
    }

    fn project(&self, u: &[Vec3]) -> Result<Vec<Vec3>> {
        u.iter()
            .enumerate()
            .map(|(i, ui)| self.prob.set_at(i).project(ui))
            .collect()
    }

    /// Splits the optimal combined command back into `(f_g, f_t)`; the net
    /// gravity residual is spread evenly in proportion to the quadrature.
    pub fn split(&self, u: &[Vec3]) -> (Vec<Vec3>, Vec<Vec3>) {
        let w = &self.prob.weights;
        let total: f64 = self.c.iter().sum();
        let shortfall = self.demand - self.weighted_sum(u);
        let mut shift = (w.tracking / (w.gravity + w.tracking)) * shortfall / total;
        if self.energy_view {
            shift.x = 0.0;
            shift.y = 0.0;
        }
        let f_g: Vec<Vec3> = self.targets.iter().map(|(tg, _)| tg + shift).collect();
        let f_t = f_g.iter().zip(u).map(|(g, ui)| g + ui).collect();
        (f_g, f_t)
    }
}

impl ScheduleCost<'_> {
    /// Full solution record for a fixed command schedule.
    pub fn solution(&self, u: &[Vec3]) -> Result<HorizonSolution> {
        let (f_g, f_t) = self.split(u);
        let mut sol = HorizonSolution::from_schedules(f_g, f_t);
        sol.f_d = u.to_vec();
        sol.objective = horizon_cost(&sol, self.prob)?.total();
        Ok(sol)
    }
}

struct Run {
    u: Vec<Vec3>,
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Whether the projected-gradient step `x -> z` promises less decrease than
/// rounding in `f(x)`.
fn resolved(l: f64, x: &[Vec3], z: &[Vec3], fx: f64) -> bool {
    let step: f64 = x.iter().zip(z).map(|(a, b)| (a - b).norm_squared()).sum();
    0.5 * l * step <= TOL.horizon_rel * fx.abs().max(f64::MIN_POSITIVE)
}

/// Monotone accelerated projected gradient with adaptive restart.
fn descend(red: &ScheduleCost, start: Vec<Vec3>, max_iter: usize) -> Result<Run> {
    let l = red.lipschitz.max(f64::MIN_POSITIVE);
    let mut x = red.project(&start)?;
    let mut fx = red.value(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut trace = vec![fx];
    let zero: Vec<Vec3> = vec![Vec3::zeros(); x.len()];
    let g0 = red.gradient(&zero);
    let scale = 1.0 + g0.iter().map(|g| g.norm()).fold(0.0, f64::max);

    let stationary = |x: &[Vec3]| -> Result<bool> {
        let g = red.gradient(x);
        let stepped: Vec<Vec3> = x.iter().zip(&g).map(|(xi, gi)| xi - gi / l).collect();
        let p = red.project(&stepped)?;
        let r = x
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            * l;
        Ok(r <= TOL.horizon_fixed_point * scale)
    };

    if stationary(&x)? {
        return Ok(Run {
            u: x,
            value: fx,
            iterations: 0,
            converged: true,
            trace,
        });
    }
    for k in 1..=max_iter {
        let g = red.gradient(&y);
        let stepped: Vec<Vec3> = y.iter().zip(&g).map(|(yi, gi)| yi - gi / l).collect();
        let z = red.project(&stepped)?;
        let fz = red.value(&z);
        let plain_step = t == 1.0;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fz <= fx {
            let prev = std::mem::replace(&mut x, z);
            fx = fz;
            y = x
                .iter()
                .zip(&prev)
                .map(|(xi, pi)| xi + ((t - 1.0) / t_next) * (xi - pi))
                .collect();
            t = t_next;
        } else if plain_step && resolved(l, &x, &z, fx) {
            // The guaranteed decrease of a plain step is below what `f` can resolve.
            trace.push(fx);
            return Ok(Run {
                u: x,
                value: fx,
                iterations: k,
                converged: true,
                trace,
            });
        } else {
            // Momentum overshot: restart from the last accepted point.
            y = x.clone();
            t = 1.0;
        }
        trace.push(fx);
        if stationary(&x)? {
            return Ok(Run {
                u: x,
                value: fx,
                iterations: k,
                converged: true,
                trace,
            });
        }
    }
    Ok(Run {
        u: x,
        value: fx,
        iterations: max_iter,
        converged: false,
        trace,
    })
}

/// Minimises the horizon cost over per-node `(f_g, f_t)` with
/// `-f_g + f_t ∈ F` at every node.
///
/// `f_g` enters only through its net integral, so it is eliminated in closed
/// form and the search runs over the commanded forces. Starts from the warm
/// start (if any), the per-node projected demand and the projected zero
/// schedule, and keeps the best.
pub fn solve_horizon(
    prob: &HorizonProblem,
    init: Option<&HorizonSolution>,
) -> Result<HorizonSolution> {
    prob.validate()?;
    let n = prob.nodes();
    if let Some(s) = init {
        check_schedule(s, n)?;
    }
    let red = ScheduleCost::new(prob)?;

    let mut starts: Vec<Vec<Vec3>> = Vec::with_capacity(3);
    if let Some(s) = init {
        starts.push(s.f_d.clone());
    }
    starts.push(red.targets.iter().map(|(tg, tt)| tt - tg).collect());
    starts.push(vec![Vec3::zeros(); n]);

    let mut best: Option<Run> = None;
    for start in starts {
        let run = descend(&red, start, prob.max_iterations)?;
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one start");
    let (f_g, f_t) = red.split(&run.u);
    let mut sol = HorizonSolution::from_schedules(f_g, f_t);
    sol.objective = horizon_cost(&sol, prob)?.total();
    sol.iterations = run.iterations;
    sol.converged = run.converged;
    sol.trace = run.trace;
    if let (Grid::Height(_), None) = (&prob.grid, &prob.descent) {
        sol.descent_rate = Some(DEFAULT_DESCENT_RATE);
    }
    Ok(sol)
}

/// Result of one receding-horizon step.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcStep {
    /// Force to apply now (node 0 of the solution).
    pub command: Vec3,
    pub solution: HorizonSolution,
    /// `solution` shifted by one node, for the next call.
    pub warm_start: HorizonSolution,
}

pub fn mpc_step(prob: &HorizonProblem, previous: Option<&HorizonSolution>) -> Result<MpcStep> {
    let previous = previous.filter(|p| p.nodes() == prob.nodes());
    let solution = solve_horizon(prob, previous)?;
    Ok(MpcStep {
        command: solution.f_d[0],
        warm_start: solution.shifted(),
        solution,
    })
}

/// Receding-horizon controller holding its own warm-start cache. One caller
/// per instance.
#[derive(Debug, Clone, Default)]
pub struct HorizonController {
    warm: Option<HorizonSolution>,
}

impl HorizonController {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, prob: &HorizonProblem) -> Result<MpcStep> {
        let step = mpc_step(prob, self.warm.as_ref())?;
        self.warm = Some(step.warm_start.clone());
        Ok(step)
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{solve_weighted, AllocProblem, PriorityWeights};
    use crate::math::gravity;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn no_energy() -> HorizonWeights {
        HorizonWeights {
            energy: 0.0,
            ..HorizonWeights::default()
        }
    }

    #[test]
    fn matched_schedules_cost_nothing() {
        let grid = HorizonGrid::new(0.0, 2.0, 6).unwrap();
        let prob = HorizonProblem::impulse(
            grid,
            1.0,
            gravity(),
            v(1.0, 0.0, 0.0),
            FeasibleSet::ball(1e9),
        )
        .with_weights(no_energy());
        let sol = HorizonSolution::from_schedules(vec![gravity(); 6], vec![v(1.0, 0.0, 0.0); 6]);
        assert_eq!(impulse_cost(&sol, &prob).unwrap().total(), 0.0);
    }

    #[test]
    fn constant_command_energy_term() {
        let grid = HorizonGrid::new(0.0, 2.0, 7).unwrap();
        let prob =
            HorizonProblem::impulse(grid, 1.0, gravity(), Vec3::zeros(), FeasibleSet::ball(1e9))
                .with_weights(HorizonWeights {
                    energy: 1.0,
                    ..HorizonWeights::default()
                });
        let sol = HorizonSolution::from_schedules(vec![gravity(); 7], vec![Vec3::zeros(); 7]);
        let cost = impulse_cost(&sol, &prob).unwrap();
        assert!((cost.total() - 192.08).abs() < 1e-9, "{cost:?}");
    }

    #[test]
    fn energy_cost_ignores_horizontal_components() {
        let grid = HeightGrid::new(-100.0, 3.0, 4).unwrap();
        let prob =
            HorizonProblem::energy(grid, 1.0, gravity(), Vec3::zeros(), FeasibleSet::ball(1e9));
        let f_g = vec![v(5.0, -2.0, 9.8); 4];
        let sol = HorizonSolution::from_schedules(f_g, vec![v(1.0, 0.0, 0.0); 4]);
        assert_eq!(energy_cost(&sol, &prob).unwrap().gravity, 0.0);

        let f_g = vec![v(0.0, 0.0, 10.8); 4];
        let sol = HorizonSolution::from_schedules(f_g, vec![Vec3::zeros(); 4]);
        let c = energy_cost(&sol, &prob).unwrap();
        assert!((c.gravity - 1e4 * 9.0).abs() < 1e-6, "{c:?}");
    }

    #[test]
    fn non_monotone_trajectory_is_rejected() {
        let grid = HeightGrid::new(0.0, 3.0, 3).unwrap();
        let mut prob =
            HorizonProblem::energy(grid, 1.0, gravity(), Vec3::zeros(), FeasibleSet::ball(1e9));
        prob.descent = Some(DescentTrajectory {
            times: vec![0.0, 1.0, 2.0],
            heights: vec![0.0, 2.0, 1.5],
            vz: vec![1.0, 1.0, 1.0],
        });
        let sol = HorizonSolution::from_schedules(vec![Vec3::zeros(); 3], vec![Vec3::zeros(); 3]);
        assert!(matches!(
            energy_cost(&sol, &prob),
            Err(CoreError::NonMonotoneHeight { index: 2 })
        ));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let grid = HorizonGrid::new(0.0, 1.0, 5).unwrap();
        let prob =
            HorizonProblem::impulse(grid, 1.0, gravity(), Vec3::zeros(), FeasibleSet::ball(1.0));
        let sol = HorizonSolution::from_schedules(vec![Vec3::zeros(); 4], vec![Vec3::zeros(); 4]);
        assert!(matches!(
            impulse_cost(&sol, &prob),
            Err(CoreError::GridMismatch(_))
        ));
        let sol = HorizonSolution::from_schedules(vec![Vec3::zeros(); 5], vec![Vec3::zeros(); 5]);
        assert!(matches!(
            energy_cost(&sol, &prob),
            Err(CoreError::GridMismatch(_))
        ));
    }

    #[test]
    fn unconstrained_without_energy_weight_tracks_exactly() {
        let grid = HorizonGrid::new(0.0, 2.0, 20).unwrap();
        let prob = HorizonProblem::impulse(
            grid,
            1.2,
            gravity(),
            v(0.5, -1.0, 0.2),
            FeasibleSet::ball(1e9),
        )
        .with_weights(no_energy());
        let sol = solve_horizon(&prob, None).unwrap();
        assert!(sol.converged);
        for i in 0..20 {
            assert!((sol.f_g[i] - 1.2 * gravity()).norm() < 1e-9);
            assert!((sol.f_t[i] - 1.2 * v(0.5, -1.0, 0.2)).norm() < 1e-9);
        }
        assert!(sol.objective <= 1e-12);
    }

    #[test]
    fn constant_data_reproduces_static_weighted_allocation() {
        let grid = HorizonGrid::new(0.0, 2.0, 20).unwrap();
        let prob = HorizonProblem::impulse(
            grid,
            1.0,
            gravity(),
            v(20.0, 20.0, 0.0),
            FeasibleSet::ball(15.0),
        )
        .with_weights(HorizonWeights {
            gravity: 1e4,
            tracking: 1e2,
            energy: 1e-6,
        });
        let sol = solve_horizon(&prob, None).unwrap();
        let fixed = solve_weighted(
            &AllocProblem::new(1.0, gravity(), v(20.0, 20.0, 0.0), FeasibleSet::ball(15.0))
                .with_weights(PriorityWeights::default()),
        )
        .unwrap();
        for f in &sol.f_d {
            assert!((f - fixed.f_d).norm() < 1e-2, "{f} vs {}", fixed.f_d);
        }
    }

    #[test]
    fn accepted_objectives_never_increase() {
        let grid = HorizonGrid::new(0.0, 2.0, 12).unwrap();
        let mut prob =
            HorizonProblem::impulse(grid, 1.0, gravity(), Vec3::zeros(), FeasibleSet::ball(11.0));
        prob.accel_desired = (0..12)
            .map(|i| v(3.0 * (i as f64 * 0.7).sin(), 2.0, -4.0))
            .collect();
        let sol = solve_horizon(&prob, None).unwrap();
        assert!(sol.trace.windows(2).all(|w| w[1] <= w[0]));
        for (i, f) in sol.f_d.iter().enumerate() {
            assert!(prob.set_at(i).contains(f, 1e-9));
        }
    }

    #[test]
    fn large_objectives_still_reach_a_fixed_point() {
        let grid = HorizonGrid::new(0.0, 2.0, 15).unwrap();
        let mut prob = HorizonProblem::impulse(
            grid,
            1.0,
            gravity(),
            v(20.0, 20.0, 0.0),
            FeasibleSet::cube(v(-5.0, -5.0, -20.0), v(5.0, 5.0, 0.0)),
        );
        prob.disturbance = Some(vec![v(1.0, -2.0, 3.0); 15]);
        let sol = solve_horizon(&prob, None).unwrap();
        assert!(sol.converged, "{} iterations", sol.iterations);
        assert!(sol.objective > 1e5);
    }

    #[test]
    fn energy_problem_records_assumed_rate() {
        let grid = HeightGrid::new(-50.0, 10.0, 8).unwrap();
        let prob =
            HorizonProblem::energy(grid, 1.0, gravity(), Vec3::zeros(), FeasibleSet::ball(5.0));
        let sol = solve_horizon(&prob, None).unwrap();
        assert_eq!(sol.descent_rate, Some(DEFAULT_DESCENT_RATE));
        // Ball of 5 N against 9.8 N of weight: the work deficit cannot be closed,
        // and every node pushes straight up.
        for f in &sol.f_d {
            assert!((f.z + 5.0).abs() < 1e-6, "{f}");
        }
    }

    #[test]
    fn controller_is_stationary_on_constant_problems() {
        let grid = HorizonGrid::new(0.0, 2.0, 10).unwrap();
        let prob = HorizonProblem::impulse(
            grid,
            1.0,
            gravity(),
            v(2.0, 0.0, 0.0),
            FeasibleSet::ball(10.5),
        );
        let mut ctl = HorizonController::new();
        let first = ctl.step(&prob).unwrap().command;
        for _ in 0..3 {
            let next = ctl.step(&prob).unwrap().command;
            assert!((next - first).norm() < 1e-9);
        }
    }

    #[test]
    fn unconstrained_first_command_is_plain_decomposition() {
        let grid = HorizonGrid::new(0.0, 2.0, 10).unwrap();
        let a0 = v(1.0, -2.0, 0.5);
        let prob = HorizonProblem::impulse(grid, 2.0, gravity(), a0, FeasibleSet::ball(1e9))
            .with_weights(no_energy());
        let step = mpc_step(&prob, None).unwrap();
        assert!((step.command - (-2.0 * gravity() + 2.0 * a0)).norm() < 1e-9);
    }

    #[test]
    fn shifting_repeats_the_tail() {
        let sol = HorizonSolution::from_schedules(
            vec![v(0.0, 0.0, 1.0), v(0.0, 0.0, 2.0), v(0.0, 0.0, 3.0)],
            vec![Vec3::zeros(); 3],
        );
        let s = sol.shifted();
        assert_eq!(
            s.f_g,
            vec![v(0.0, 0.0, 2.0), v(0.0, 0.0, 3.0), v(0.0, 0.0, 3.0)]
        );
    }
}
