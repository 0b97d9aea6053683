use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use gcf_sim::{compute_metrics, run_scenario, ScenarioConfig, SimError, SimLog};

use crate::error::{CliError, Result};
use crate::output::{self, RunManifest, LOG_SCHEMA_VERSION};
use crate::parse::{self, FaultOverride};

const BUNDLED_PREFIX: &str = "bundled:";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario config file, or `bundled:NAME`. Repeat with --batch.
    #[arg(long = "config", required = true)]
    configs: Vec<String>,
    /// Output directory.
    #[arg(long, env = "GCF_OUT_DIR", default_value = "gcf-out")]
    out: PathBuf,
    /// Replace the configured fault: `none`, `motor:K@T` or `wing@T`.
    #[arg(long, value_parser = parse::fault)]
    fault_override: Option<FaultOverride>,
    /// Run every config in parallel, each into `OUT/<name>`.
    #[arg(long)]
    batch: bool,
}

struct Source {
    path: String,
    label: String,
    bytes: Vec<u8>,
}

fn read_source(path: &str) -> Result<Source> {
    if let Some(name) = path.strip_prefix(BUNDLED_PREFIX) {
        let text = gcf_sim::bundled(name).ok_or_else(|| {
            let known: Vec<&str> = gcf_sim::BUNDLED.iter().map(|(n, _)| *n).collect();
            CliError::Usage(format!(
                "unknown bundled config '{name}', expected one of {known:?}"
            ))
        })?;
        return Ok(Source {
            path: path.to_string(),
            label: name.to_string(),
            bytes: text.as_bytes().to_vec(),
        });
    }
    let p = Path::new(path);
    let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
    let label = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    Ok(Source {
        path: path.to_string(),
        label,
        bytes,
    })
}

fn resolve(src: &Source, fault: Option<FaultOverride>) -> Result<ScenarioConfig> {
    let text = std::str::from_utf8(&src.bytes)
        .map_err(|e| CliError::Usage(format!("{}: {e}", src.path)))?;
    let mut cfg = ScenarioConfig::from_json(text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", src.path)))?;
    if let Some(FaultOverride(f)) = fault {
        cfg.fault = f;
    }
    cfg.validate()
        .map_err(|e| CliError::Usage(format!("{}: {e}", src.path)))?;
    Ok(cfg)
}

fn write_run(dir: &Path, src: &Source, cfg: &ScenarioConfig, log: &SimLog) -> Result<()> {
    output::create_dir(dir)?;
    let resolved = cfg.to_json();
    output::write_text(&dir.join("config.json"), &resolved)?;
    output::write_log(&dir.join("log.csv"), log)?;
    output::write_events(&dir.join("events.csv"), log)?;
    let mut artifacts = vec!["config.json", "log.csv", "events.csv"];
    if let Ok(metrics) = compute_metrics(log) {
        output::write_json(&dir.join("metrics.json"), &metrics)?;
        artifacts.push("metrics.json");
    }
    let manifest = RunManifest {
        command: "simulate",
        config_path: src.path.clone(),
        config_hash: output::sha256_hex(resolved.as_bytes()),
        source_hash: output::sha256_hex(&src.bytes),
        output_dir: dir.display().to_string(),
        artifacts: artifacts.into_iter().map(String::from).collect(),
        log_schema_version: LOG_SCHEMA_VERSION,
    };
    output::write_json(&dir.join("manifest.json"), &manifest)
}

fn simulate_one(src: &Source, dir: &Path, fault: Option<FaultOverride>) -> Result<()> {
    let cfg = resolve(src, fault)?;
    match run_scenario(&cfg) {
        Ok(log) => write_run(dir, src, &cfg, &log),
        Err(SimError::Integration {
            step,
            time,
            source,
            log,
        }) => {
            write_run(dir, src, &cfg, &log)?;
            Err(CliError::Integration(format!(
                "{}: step {step} at t={time}: {source}",
                src.path
            )))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let fault = args.fault_override;
    if !args.batch {
        let [path] = args.configs.as_slice() else {
            return Err(CliError::Usage("several configs given; use --batch".into()));
        };
        return simulate_one(&read_source(path)?, &args.out, fault);
    }

    let sources = args
        .configs
        .iter()
        .map(|p| read_source(p))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    for s in &sources {
        if !seen.insert(s.label.as_str()) {
            return Err(CliError::Usage(format!(
                "two batch configs share the name '{}'",
                s.label
            )));
        }
    }
    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sources
            .iter()
            .map(|src| {
                let dir = args.out.join(&src.label);
                scope.spawn(move || simulate_one(src, &dir, fault))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Usage("worker panicked".into())))
            })
            .collect()
    });
    let mut first = None;
    for (src, r) in sources.iter().zip(results) {
        if let Err(e) = r {
            eprintln!("{}: {e}", src.label);
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}
