//! Wings-level, constant-speed trim of the fixed-wing model.

use gcf_core::{Quaternion, Vec3};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VehicleError};
use crate::fixedwing::{fw_derivative, FwParams, SurfaceCommand};
use crate::state::RigidBodyState;

/// Level flight along earth x at `airspeed` with pitch `pitch` and the
/// commands that hold it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimPoint {
    pub airspeed: f64,
    pub pitch: f64,
    pub command: SurfaceCommand,
}

impl TrimPoint {
    pub fn state(&self, p: Vec3) -> RigidBodyState {
        RigidBodyState {
            p,
            v: Vec3::new(self.airspeed, 0.0, 0.0),
            q: Quaternion::from_euler(0.0, self.pitch, 0.0),
            omega: Vec3::zeros(),
        }
    }

    /// Trim of the default aircraft at 15 m/s.
    pub fn desk_scale() -> Self {
        serde_json::from_str(include_str!("../fixtures/fw_trim.json"))
            .expect("bundled trim fixture parses")
    }
}

/// Unknowns: pitch, throttle, elevator, differential aileron
/// (`δ_al = -δ_ar`). Residuals: longitudinal and vertical acceleration, roll
/// and pitch angular acceleration.
fn residual(params: &FwParams, airspeed: f64, x: &Vector4<f64>) -> (Vector4<f64>, TrimPoint) {
    let trim = TrimPoint {
        airspeed,
        pitch: x[0],
        command: SurfaceCommand {
            delta_t: x[1],
            delta_al: x[3],
            delta_ar: -x[3],
            delta_e: x[2],
            delta_r: 0.0,
        },
    };
    let d = fw_derivative(
        &trim.state(Vec3::zeros()),
        &trim.command,
        params,
        &Vec3::zeros(),
        false,
    );
    (Vector4::new(d.dv.x, d.dv.z, d.domega.x, d.domega.y), trim)
}

/// Newton iteration with a finite-difference Jacobian.
pub fn find_trim(params: &FwParams, airspeed: f64) -> Result<TrimPoint> {
    params.validate()?;
    let mut x = Vector4::new(0.05, 0.5, 0.0, 0.0);
    let (mut r, _) = residual(params, airspeed, &x);
    for _ in 0..100 {
        if r.amax() < 1e-12 {
            break;
        }
        let h = 1e-7;
        let mut jac = Matrix4::zeros();
        for j in 0..4 {
            let mut xp = x;
            xp[j] += h;
            let mut xm = x;
            xm[j] -= h;
            let col =
                (residual(params, airspeed, &xp).0 - residual(params, airspeed, &xm).0) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let dx = jac
            .lu()
            .solve(&(-r))
            .ok_or_else(|| VehicleError::InvalidParams("singular trim Jacobian".into()))?;
        let mut scale = 1.0;
        loop {
            let xn = x + scale * dx;
            let (rn, _) = residual(params, airspeed, &xn);
            if rn.norm() < r.norm() || scale < 1e-6 {
                x = xn;
                r = rn;
                break;
            }
            scale *= 0.5;
        }
    }
    let (r, trim) = residual(params, airspeed, &x);
    if r.amax() > 1e-9 || !trim.command.within(params) {
        return Err(VehicleError::InvalidParams(format!(
            "no trim at {airspeed} m/s within surface limits (residual {:.2e})",
            r.amax()
        )));
    }
    Ok(trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_trim_holds_level_flight() {
        let p = FwParams::default();
        let trim = TrimPoint::desk_scale();
        let d = fw_derivative(
            &trim.state(Vec3::zeros()),
            &trim.command,
            &p,
            &Vec3::zeros(),
            false,
        );
        assert!(d.dv.norm() <= 1e-3, "{}", d.dv);
        assert!(trim.command.within(&p));
    }

    #[test]
    fn root_finder_reproduces_fixture() {
        let fixture = TrimPoint::desk_scale();
        let trim = find_trim(&FwParams::default(), fixture.airspeed).unwrap();
        assert!((trim.pitch - fixture.pitch).abs() < 1e-9);
        let (a, b) = (trim.command.to_array(), fixture.command.to_array());
        assert!(
            a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9),
            "{trim:?}"
        );
    }
}
