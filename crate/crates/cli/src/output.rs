//! Artifact writers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use gcf_core::Vec3;
use gcf_sim::SimLog;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Version of the CSV column layouts written by this tool.
pub const LOG_SCHEMA_VERSION: u32 = 1;

/// 17 significant digits, enough to re-parse every `f64` exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_vec(row: &mut Vec<String>, v: &Vec3) {
    row.extend(v.iter().map(|x| num(*x)));
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub struct Csv {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Csv {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
        writer
            .write_record(header)
            .map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn log_header(control_dim: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((1..=control_dim).map(|k| format!("u{k}")));
    for f in ["fg", "ft", "fd"] {
        h.extend(["x", "y", "z"].iter().map(|a| format!("{f}{a}")));
    }
    h.extend(
        ["cost_g", "cost_t", "cost_e", "fault"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

pub fn write_log(path: &Path, log: &SimLog) -> Result<()> {
    let mut out = Csv::create(path, &log_header(log.control_dim))?;
    for r in &log.records {
        let s = &r.state;
        let mut row = vec![num(r.t)];
        push_vec(&mut row, &s.p);
        push_vec(&mut row, &s.v);
        row.extend([s.q.w, s.q.x, s.q.y, s.q.z].map(num));
        push_vec(&mut row, &s.omega);
        row.extend(r.command.iter().map(|u| num(*u)));
        push_vec(&mut row, &r.f_g);
        push_vec(&mut row, &r.f_t);
        push_vec(&mut row, &r.f_d);
        row.extend([r.cost.gravity, r.cost.tracking, r.cost.energy].map(num));
        row.push(if r.fault { "1" } else { "0" }.to_string());
        out.row(&row)?;
    }
    out.finish()
}

pub fn write_events(path: &Path, log: &SimLog) -> Result<()> {
    let header = ["t", "kind", "message"].map(String::from);
    let mut out = Csv::create(path, &header)?;
    for e in &log.events {
        let kind = serde_json::to_value(e.kind)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_else(|| format!("{:?}", e.kind));
        out.row(&[num(e.t), kind, e.message.clone()])?;
    }
    out.finish()
}

/// Provenance record written next to every run's artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config_path: String,
    /// SHA-256 of the resolved configuration as written to `config.json`.
    pub config_hash: String,
    /// SHA-256 of the configuration bytes as read.
    pub source_hash: String,
    pub output_dir: String,
    pub artifacts: Vec<String>,
    pub log_schema_version: u32,
}
