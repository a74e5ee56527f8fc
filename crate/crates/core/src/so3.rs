//! Euler-angle viewpoints, rotation matrices and the geodesic error metric.
//!
//! Euler convention: a pose `(azimuth, pitch, roll)` induces the rotation
//!
//! ```text
//! R = Rz(roll) · Rx(pitch) · Rz(azimuth)
//! ```
//!
//! (intrinsic Z-X-Z). Every error value produced by this crate depends on this
//! choice, so any externally produced poses must use the same convention.
//!
//! Angles are radians everywhere inside the crate. Degrees only appear at I/O
//! boundaries (record files and reports).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Orthonormality / determinant tolerance of [`RotationMatrix`].
pub const ROTATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
}

/// A viewpoint `(azimuth, pitch, roll)` in radians.
///
/// Canonical ranges: azimuth in `[0, 2π)`, pitch in `[-π/2, π/2]`, roll in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerPose {
    azimuth: f64,
    pitch: f64,
    roll: f64,
}

impl EulerPose {
    /// Builds a canonicalized pose. Azimuth and roll are wrapped (rotation
    /// preserving). Pitch is wrapped into `(-π, π]` and then clamped to the
    /// elevation range `[-π/2, π/2]`.
    pub fn new(azimuth: f64, pitch: f64, roll: f64) -> Result<Self, GeometryError> {
        if !(azimuth.is_finite() && pitch.is_finite() && roll.is_finite()) {
            return Err(GeometryError::InvalidPose(format!(
                "non-finite angle in ({azimuth}, {pitch}, {roll})"
            )));
        }
        Ok(Self {
            azimuth: wrap_positive(azimuth),
            pitch: wrap_signed(pitch).clamp(-FRAC_PI_2, FRAC_PI_2),
            roll: wrap_signed(roll),
        })
    }

    pub fn from_degrees(azimuth: f64, pitch: f64, roll: f64) -> Result<Self, GeometryError> {
        Self::new(azimuth.to_radians(), pitch.to_radians(), roll.to_radians())
    }

    pub fn identity() -> Self {
        Self {
            azimuth: 0.0,
            pitch: 0.0,
            roll: 0.0,
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn roll(&self) -> f64 {
        self.roll
    }

    /// `[azimuth, pitch, roll]` in degrees.
    pub fn to_degrees(&self) -> [f64; 3] {
        [
            self.azimuth.to_degrees(),
            self.pitch.to_degrees(),
            self.roll.to_degrees(),
        ]
    }

    pub fn to_rotation(&self) -> RotationMatrix {
        pose_to_rotation(self)
    }
}

/// Wraps into `[0, 2π)`.
fn wrap_positive(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Wraps into `(-π, π]`.
fn wrap_signed(angle: f64) -> f64 {
    let wrapped = wrap_positive(angle);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// A proper rotation: `M·Mᵀ = I` and `det M = 1` within [`ROTATION_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix([[f64; 3]; 3]);

impl RotationMatrix {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        check_rotation(&rows)?;
        Ok(Self(rows))
    }

    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(transpose(&self.0))
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Composition `self · rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        Self(mat_mul(&self.0, &rhs.0))
    }

    /// Rotation from a (not necessarily normalized) quaternion `w + xi + yj + zk`.
    fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        Self([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }
}

fn transpose(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn determinant(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn check_rotation(m: &[[f64; 3]; 3]) -> Result<(), GeometryError> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidRotation("non-finite entry".into()));
    }
    let gram = mat_mul(m, &transpose(m));
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            if (v - expected).abs() > ROTATION_TOLERANCE {
                return Err(GeometryError::InvalidRotation(format!(
                    "M·Mᵀ[{i}][{j}] = {v}"
                )));
            }
        }
    }
    let det = determinant(m);
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeometryError::InvalidRotation(format!("det = {det}")));
    }
    Ok(())
}

/// `Rz(roll) · Rx(pitch) · Rz(azimuth)`.
pub fn pose_to_rotation(pose: &EulerPose) -> RotationMatrix {
    RotationMatrix::about_z(pose.roll)
        .compose(&RotationMatrix::about_x(pose.pitch))
        .compose(&RotationMatrix::about_z(pose.azimuth))
}

/// Angle of the relative rotation `aᵀ·b`, in radians within `[0, π]`.
///
/// Equal to `‖log(aᵀb)‖_F / √2` and to `arccos((tr(aᵀb) − 1) / 2)`. Evaluated
/// as `atan2(sin θ, cos θ)` with `sin θ` taken from the skew part of `aᵀb`:
/// `arccos` near ±1 turns rounding of order 1e-16 into angle errors near 1e-8.
pub fn geodesic_distance(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    let m = a.transpose().compose(b).0;
    let cos = (m[0][0] + m[1][1] + m[2][2] - 1.0) / 2.0;
    let axis = [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]];
    let sin = axis.iter().map(|v| v * v).sum::<f64>().sqrt() / 2.0;
    sin.atan2(cos)
}

/// Geodesic error between two poses, in degrees.
pub fn pose_error_degrees(estimate: &EulerPose, truth: &EulerPose) -> f64 {
    geodesic_distance(&estimate.to_rotation(), &truth.to_rotation()).to_degrees()
}

/// Haar-uniform rotation, drawn as a normalized 4-d Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> RotationMatrix {
    loop {
        let q: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        if q.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
            return RotationMatrix::from_quaternion(q[0], q[1], q[2], q[3]);
        }
    }
}
