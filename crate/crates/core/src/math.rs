//! Vectors, quaternions and frame conventions.
//!
//! The earth frame is flat, origin at the initial position, with z pointing
//! down toward the ground. Body axes are x through the nose and z down in the
//! symmetry plane. Gravity is therefore `(0, 0, +g)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tolerances::TOL;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Standard gravitational acceleration used throughout, m/s².
pub const STANDARD_GRAVITY: f64 = 9.8;

/// Gravity vector in the z-down earth frame.
pub fn gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, STANDARD_GRAVITY)
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

pub(crate) fn check_finite(name: &str, v: &Vec3) -> Result<()> {
    if is_finite(v) {
        Ok(())
    } else {
        Err(CoreError::Domain(format!(
            "{name} has non-finite components"
        )))
    }
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Attitude quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quaternion {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::new(c, s * a.x, s * a.y, s * a.z)
    }

    /// Z-Y-X (yaw, pitch, roll) Euler angles.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let qz = Self::from_axis_angle(&Vec3::z(), yaw);
        let qy = Self::from_axis_angle(&Vec3::y(), pitch);
        let qx = Self::from_axis_angle(&Vec3::x(), roll);
        qz.mul(&qy).mul(&qx)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Time derivative under body-frame angular velocity `omega`:
    /// `q̇ = ½ [0, -ωᵀ; ω, -[ω]×] q`.
    pub fn kinematics(&self, omega: &Vec3) -> [f64; 4] {
        let v = self.vector();
        let dw = -0.5 * omega.dot(&v);
        let dv = 0.5 * (self.w * omega - omega.cross(&v));
        [dw, dv.x, dv.y, dv.z]
    }

    /// Rotation matrix mapping body-frame vectors into the earth frame.
    pub fn rotation(&self) -> Mat3 {
        quat_to_rotation(self).matrix
    }
}

/// Result of [`quat_to_rotation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub matrix: Mat3,
    /// Set when the input was further than [`crate::TOL`]`.quat_flag` from
    /// unit norm and had to be renormalized.
    pub renormalized: bool,
}

/// Body-to-earth rotation matrix of `q`. Non-unit input is normalized first.
pub fn quat_to_rotation(q: &Quaternion) -> Rotation {
    let n = q.norm();
    let renormalized = (n - 1.0).abs() > TOL.quat_flag;
    let q = if n == 1.0 { *q } else { q.normalized() };
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let matrix = Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    Rotation {
        matrix,
        renormalized,
    }
}

/// Angle of attack and sideslip relating the wind frame to the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindAngles {
    pub alpha: f64,
    pub beta: f64,
}

impl WindAngles {
    /// Matrix mapping wind-frame vectors into the body frame. Its first column
    /// is the unit airspeed direction in body axes.
    pub fn wind_to_body(&self) -> Mat3 {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        Mat3::new(ca * cb, -ca * sb, -sa, sb, cb, 0.0, sa * cb, -sa * sb, ca)
    }
}

/// Earth/body/wind frame conventions plus the ground reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConvention {
    /// Altitude of the earth-frame origin above the ground, m.
    pub ground_offset: f64,
}

impl FrameConvention {
    pub fn new(ground_offset: f64) -> Self {
        Self { ground_offset }
    }

    /// Height above ground of earth-frame position `p` (z points down).
    pub fn altitude(&self, p: &Vec3) -> f64 {
        -p.z + self.ground_offset
    }

    /// Earth-frame z coordinate of a point at altitude `h`.
    pub fn z_at_altitude(&self, h: f64) -> f64 {
        self.ground_offset - h
    }

    pub fn gravity(&self) -> Vec3 {
        gravity()
    }
}
