use clap::{Args, ValueEnum};
use gcf_core::{
    solve_lexicographic, solve_weighted, solve_weighted_disturbed, AllocProblem, FeasibleSet,
    PriorityWeights, Vec3,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lex,
    Weighted,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    /// Gravity force m·g, N (unit mass is assumed).
    #[arg(long, value_parser = parse::vec3, allow_hyphen_values = true)]
    mg: Vec3,
    /// Tracking force m·a_d, N.
    #[arg(long, value_parser = parse::vec3, allow_hyphen_values = true)]
    mad: Vec3,
    /// Feasible set, `ball:r` or `box:lo..hi`; repeat to intersect.
    #[arg(long = "set", required = true, value_parser = parse::set, allow_hyphen_values = true)]
    sets: Vec<FeasibleSet>,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Gravity weight (weighted mode).
    #[arg(long)]
    wg: Option<f64>,
    /// Tracking weight (weighted mode).
    #[arg(long)]
    wt: Option<f64>,
    /// Disturbance force estimate, N.
    #[arg(long, value_parser = parse::vec3, allow_hyphen_values = true)]
    dist: Option<Vec3>,
}

#[derive(Debug, Serialize)]
struct Report {
    mode: Mode,
    f_g: Vec3,
    f_t: Vec3,
    f_d: Vec3,
    gravity_residual: f64,
    tracking_residual: f64,
}

pub fn run(args: &AllocateArgs) -> Result<String> {
    let mut weights = PriorityWeights::default();
    if args.mode == Mode::Lex && (args.wg.is_some() || args.wt.is_some()) {
        return Err(CliError::Usage(
            "--wg and --wt apply to weighted mode only".into(),
        ));
    }
    weights.gravity = args.wg.unwrap_or(weights.gravity);
    weights.tracking = args.wt.unwrap_or(weights.tracking);

    let set = match args.sets.as_slice() {
        [one] => one.clone(),
        many => FeasibleSet::intersection(many.to_vec()),
    };
    let mut prob = AllocProblem::new(1.0, args.mg, args.mad, set).with_weights(weights);
    if let Some(d) = args.dist {
        prob = prob.with_disturbance(d);
    }
    // Malformed problem data is a usage error; set problems map to exit 3.
    prob.set.validate()?;
    let alloc = match (args.mode, prob.disturbance) {
        (Mode::Lex, _) => solve_lexicographic(&prob),
        (Mode::Weighted, None) => solve_weighted(&prob),
        (Mode::Weighted, Some(_)) => solve_weighted_disturbed(&prob),
    }?;
    let targets = prob.targets()?;
    let report = Report {
        mode: args.mode,
        f_g: alloc.f_g_star,
        f_t: alloc.f_t_star,
        f_d: alloc.f_d,
        gravity_residual: alloc.gravity_residual(&targets),
        tracking_residual: alloc.tracking_residual(&targets),
    };
    serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))
}
