//! Position references `p_d(t)` with their rates.

use gcf_core::{math::is_finite, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    Hover {
        position: Vec3,
    },
    /// `start + velocity t`.
    Line {
        start: Vec3,
        velocity: Vec3,
    },
    /// Piecewise-linear waypoints, held after the last time.
    Table {
        times: Vec<f64>,
        positions: Vec<Vec3>,
    },
}

impl Reference {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Reference::Hover { position } => is_finite(position),
            Reference::Line { start, velocity } => is_finite(start) && is_finite(velocity),
            Reference::Table { times, positions } => {
                !times.is_empty()
                    && times.len() == positions.len()
                    && times.iter().all(|t| t.is_finite())
                    && times.windows(2).all(|w| w[1] > w[0])
                    && positions.iter().all(is_finite)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("invalid reference {self:?}")))
        }
    }

    /// `(p_d, ṗ_d)` at time `t`.
    pub fn eval(&self, t: f64) -> (Vec3, Vec3) {
        match self {
            Reference::Hover { position } => (*position, Vec3::zeros()),
            Reference::Line { start, velocity } => (start + velocity * t, *velocity),
            Reference::Table { times, positions } => {
                let n = times.len();
                if t <= times[0] {
                    return (positions[0], Vec3::zeros());
                }
                if t >= times[n - 1] {
                    return (positions[n - 1], Vec3::zeros());
                }
                let i = times.partition_point(|&x| x <= t) - 1;
                let span = times[i + 1] - times[i];
                let rate = (positions[i + 1] - positions[i]) / span;
                (positions[i] + rate * (t - times[i]), rate)
            }
        }
    }
}
