//! Flag value parsers.

use gcf_core::{FeasibleSet, Vec3};
use gcf_sim::FaultSpec;

pub fn vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut v = Vec3::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"))?;
        if !v[i].is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
    }
    Ok(v)
}

/// `ball:r` or `box:x,y,z..x,y,z`.
pub fn set(s: &str) -> Result<FeasibleSet, String> {
    if let Some(r) = s.strip_prefix("ball:") {
        let radius = r
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("ball radius '{r}': {e}"))?;
        return Ok(FeasibleSet::ball(radius));
    }
    if let Some(b) = s.strip_prefix("box:") {
        let (lo, hi) = b
            .split_once("..")
            .ok_or_else(|| format!("expected box:lo..hi, got '{s}'"))?;
        return Ok(FeasibleSet::cube(vec3(lo)?, vec3(hi)?));
    }
    Err(format!("expected ball:r or box:lo..hi, got '{s}'"))
}

/// A fault replacing the configured one; `None` clears it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultOverride(pub Option<FaultSpec>);

/// `none`, `motor:K@T` or `wing@T`.
pub fn fault(s: &str) -> Result<FaultOverride, String> {
    parse_fault(s).map(FaultOverride)
}

fn parse_fault(s: &str) -> Result<Option<FaultSpec>, String> {
    if s == "none" {
        return Ok(None);
    }
    let onset = |t: &str| t.parse::<f64>().map_err(|e| format!("onset '{t}': {e}"));
    if let Some(rest) = s.strip_prefix("motor:") {
        let (k, t) = rest
            .split_once('@')
            .ok_or_else(|| format!("expected motor:K@T, got '{s}'"))?;
        let motor = k
            .parse::<usize>()
            .map_err(|e| format!("motor '{k}': {e}"))?;
        return Ok(Some(FaultSpec::Motor {
            motor,
            onset: onset(t)?,
        }));
    }
    if let Some(t) = s.strip_prefix("wing@") {
        return Ok(Some(FaultSpec::WingLoss { onset: onset(t)? }));
    }
    Err(format!("expected none, motor:K@T or wing@T, got '{s}'"))
}
