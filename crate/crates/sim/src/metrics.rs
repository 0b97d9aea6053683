//! Summary figures of a simulation log.

use gcf_core::gravity;
use gcf_core::math::STANDARD_GRAVITY;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::runner::SimLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsSummary {
    /// Root mean square of `‖p - p_d‖` over all records, m.
    pub tracking_rmse: f64,
    pub final_position_error: f64,
    /// Largest downward velocity component, m/s (0 if never descending).
    pub max_descent_speed: f64,
    /// Downward velocity at ground contact, m/s.
    pub touchdown_vz: Option<f64>,
    /// `‖∫ (f_g - m g) dt‖` over the run, N s.
    pub gravity_impulse_residual: f64,
    /// Touchdown speed of an uncontrolled fall from the initial state, m/s.
    pub ballistic_touchdown_speed: f64,
    pub duration: f64,
    pub controller_events: usize,
}

pub fn compute_metrics(log: &SimLog) -> Result<MetricsSummary> {
    let n = log.records.len();
    if n == 0 {
        return Err(SimError::EmptyLog);
    }
    let err = |i: usize| {
        let r = &log.records[i];
        (r.state.p - log.reference.eval(r.t).0).norm()
    };
    let tracking_rmse = ((0..n).map(|i| err(i).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mg = log.mass * gravity();
    let residual = log
        .records
        .iter()
        .take(n.saturating_sub(1))
        .map(|r| (r.f_g - mg) * log.dt)
        .sum::<gcf_core::Vec3>()
        .norm();
    let max_descent_speed = log.records.iter().map(|r| r.state.v.z).fold(0.0, f64::max);
    let ballistic = {
        let r = &log.records[0];
        let h0 = log.altitude(&r.state.p).max(0.0);
        let vz0 = r.state.v.z.max(0.0);
        (vz0 * vz0 + 2.0 * STANDARD_GRAVITY * h0).sqrt()
    };
    Ok(MetricsSummary {
        tracking_rmse,
        final_position_error: err(n - 1),
        max_descent_speed,
        touchdown_vz: log.touchdown.map(|t| t.velocity.z),
        gravity_impulse_residual: residual,
        ballistic_touchdown_speed: ballistic,
        duration: log.records[n - 1].t,
        controller_events: log.events.len(),
    })
}
