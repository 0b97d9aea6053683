//! Splitting an estimated disturbance into its gravity-aligned part and the
//! orthogonal remainder.

use crate::error::{CoreError, Result};
use crate::math::{check_finite, Vec3};
use crate::tolerances::TOL;

/// `(d_g, d_perp)` with `d_g = (gᵀd / gᵀg) g` and `d_perp = d - d_g`.
pub fn decompose_disturbance(d: &Vec3, g: &Vec3) -> Result<(Vec3, Vec3)> {
    check_finite("disturbance", d)?;
    check_finite("gravity", g)?;
    let gg = g.dot(g);
    if gg.sqrt() <= TOL.min_gravity {
        return Err(CoreError::Domain("gravity vector has zero length".into()));
    }
    let along = (g.dot(d) / gg) * g;
    Ok((along, d - along))
}
