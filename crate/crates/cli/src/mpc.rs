use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gcf_core::{horizon_cost, solve_horizon, CostTerms, Grid};
use gcf_sim::{HorizonConfig, Viewpoint};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::{self, num, Csv, RunManifest, LOG_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewpointArg {
    Impulse,
    Energy,
}

#[derive(Debug, Args)]
pub struct MpcArgs {
    /// Horizon problem config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    viewpoint: ViewpointArg,
    /// Output directory.
    #[arg(long, env = "GCF_OUT_DIR", default_value = "gcf-out")]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Summary {
    viewpoint: ViewpointArg,
    nodes: usize,
    objective: f64,
    cost: CostTerms,
    iterations: usize,
    converged: bool,
    output_dir: String,
}

pub fn run(args: &MpcArgs) -> Result<String> {
    let bytes = fs::read(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::io(&args.config, e))?;
    let cfg = HorizonConfig::from_json(text).map_err(|e| CliError::io(&args.config, e))?;
    let viewpoint = match args.viewpoint {
        ViewpointArg::Impulse => Viewpoint::Impulse,
        ViewpointArg::Energy => Viewpoint::Energy,
    };
    let prob = cfg
        .problem(viewpoint)
        .map_err(|e| CliError::io(&args.config, e))?;
    let sol = solve_horizon(&prob, None)?;
    let cost = horizon_cost(&sol, &prob)?;

    let dir = args.out.as_path();
    output::create_dir(dir)?;
    write_trace(&dir.join("trace.csv"), &sol.trace)?;
    let mut schedule = Csv::create(&dir.join("schedule.csv"), &schedule_header())?;
    for i in 0..sol.nodes() {
        let at = match &prob.grid {
            Grid::Time(g) => g.time(i),
            Grid::Height(g) => g.height(i),
        };
        let mut row = vec![i.to_string(), num(at)];
        for v in [&sol.f_g[i], &sol.f_t[i], &sol.f_d[i]] {
            row.extend(v.iter().map(|x| num(*x)));
        }
        schedule.row(&row)?;
    }
    schedule.finish()?;

    let manifest = RunManifest {
        command: "mpc",
        config_path: args.config.display().to_string(),
        config_hash: output::sha256_hex(&bytes),
        source_hash: output::sha256_hex(&bytes),
        output_dir: dir.display().to_string(),
        artifacts: vec!["trace.csv".into(), "schedule.csv".into()],
        log_schema_version: LOG_SCHEMA_VERSION,
    };
    output::write_json(&dir.join("manifest.json"), &manifest)?;

    if !sol.converged {
        return Err(CliError::NotConverged {
            iterations: sol.iterations,
        });
    }
    let summary = Summary {
        viewpoint: args.viewpoint,
        nodes: sol.nodes(),
        objective: sol.objective,
        cost,
        iterations: sol.iterations,
        converged: sol.converged,
        output_dir: dir.display().to_string(),
    };
    serde_json::to_string_pretty(&summary).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = Csv::create(path, &["iteration".to_string(), "objective".to_string()])?;
    for (k, f) in trace.iter().enumerate() {
        out.row(&[k.to_string(), num(*f)])?;
    }
    out.finish()
}

fn schedule_header() -> Vec<String> {
    let mut h = vec!["node".to_string(), "at".to_string()];
    for f in ["fg", "ft", "fd"] {
        h.extend(["x", "y", "z"].iter().map(|a| format!("{f}{a}")));
    }
    h
}
