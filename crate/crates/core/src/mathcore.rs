//! Frame conventions, rotation algebra and saturation primitives.
//!
//! Frames used throughout the crate:
//!
//! - **Earth**: ENU (x East, y North, z Up). Gravity is `(0, 0, -9.8)` m/s².
//! - **Body**: x right, y forward, z up. Lift acts along body +z.
//! - **Camera**: z along the optical axis, x along image `u` (right), y along
//!   image `v` (down). The default mount points the optical axis at body +y.
//!
//! Rotation matrices map source-frame vectors into the destination frame, so
//! `R_be * v_body` is the same vector expressed in the earth frame.

use nalgebra::{Matrix3, Vector3};

use crate::error::MathError;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
/// A proper rotation matrix. Kept as a plain alias so the formulas read like
/// matrix algebra; [`is_rotation`] checks membership in SO(3).
pub type RotMatrix = Matrix3<f64>;

/// Orthonormality / determinant tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;
/// Tolerance for exact algebraic identities (skew/vex, norms).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Standard gravity magnitude used by the default frame convention.
pub const GRAVITY: f64 = 9.8;

/// Axis conventions and gravity for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConvention {
    /// Gravity vector in the earth frame.
    pub gravity: Vec3,
    /// Camera-to-body rotation.
    pub r_cb: RotMatrix,
}

impl FrameConvention {
    /// ENU earth frame, z-up gravity, camera looking along body-forward.
    pub fn enu_forward_camera() -> Self {
        Self { gravity: Vec3::new(0.0, 0.0, -GRAVITY), r_cb: camera_forward_mount() }
    }
}

impl Default for FrameConvention {
    fn default() -> Self {
        Self::enu_forward_camera()
    }
}

/// Camera-to-body rotation for a horizontally mounted camera: optical axis
/// (camera z) along body y, image right (camera x) along body x, image down
/// (camera y) along body -z.
pub fn camera_forward_mount() -> RotMatrix {
    Mat3::from_columns(&[Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 1.0, 0.0)])
}

/// Camera-to-body rotation for a downward-looking camera: optical axis along
/// body -z, image right along body x, image down along body -y.
pub fn camera_down_mount() -> RotMatrix {
    Mat3::from_columns(&[Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, 0.0, -1.0)])
}

/// Cross-product matrix: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]. Rejects matrices whose symmetric part exceeds
/// [`ROTATION_TOL`] (Frobenius norm of `M + Mᵀ`).
pub fn vex(m: &Mat3) -> Result<Vec3, MathError> {
    let sym = (m + m.transpose()).norm();
    if !(sym <= ROTATION_TOL) {
        return Err(MathError::NotSkew(sym));
    }
    Ok(Vec3::new(0.5 * (m[(2, 1)] - m[(1, 2)]), 0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)])))
}

/// Axis-angle to rotation matrix, `I + [r]× sinφ + [r]×² (1 − cosφ)`.
pub fn rodrigues(axis: &Vec3, angle: f64) -> Result<RotMatrix, MathError> {
    if angle == 0.0 {
        return Ok(Mat3::identity());
    }
    let n = axis.norm();
    if (n - 1.0).abs() > ROTATION_TOL {
        return Err(MathError::NonUnitAxis(n));
    }
    let k = skew(axis);
    Ok(Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos()))
}

/// Exponential map of a rotation vector (axis times angle). Total on all
/// inputs, returning identity for a zero vector.
pub fn exp_so3(rotvec: &Vec3) -> RotMatrix {
    let angle = rotvec.norm();
    if angle < 1e-12 {
        // second-order series keeps the result orthonormal to ~1e-24
        let k = skew(rotvec);
        return Mat3::identity() + k + 0.5 * k * k;
    }
    let k = skew(&(rotvec / angle));
    Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Geodesic angle between two rotations, in `[0, π]`.
pub fn rotation_angle_between(a: &RotMatrix, b: &RotMatrix) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) * 0.5;
    c.clamp(-1.0, 1.0).acos()
}

/// Scale `w` down to norm `max_norm` if it is longer; otherwise pass through.
pub fn sat_vec(w: &Vec3, max_norm: f64) -> Result<Vec3, MathError> {
    if !(max_norm > 0.0) {
        return Err(MathError::NonPositiveLimit(max_norm));
    }
    let n = w.norm();
    if n <= max_norm {
        Ok(*w)
    } else {
        Ok(w * (max_norm / n))
    }
}

pub fn clamp_scalar(x: f64, lo: f64, hi: f64) -> Result<f64, MathError> {
    if lo > hi {
        return Err(MathError::EmptyInterval { lo, hi });
    }
    Ok(x.max(lo).min(hi))
}

/// `‖RᵀR − I‖_F` and `|det R − 1|`, the two SO(3) membership residuals.
pub fn rotation_residuals(r: &RotMatrix) -> (f64, f64) {
    let ortho = (r.transpose() * r - Mat3::identity()).norm();
    (ortho, (r.determinant() - 1.0).abs())
}

pub fn is_rotation(r: &RotMatrix, tol: f64) -> bool {
    let (o, d) = rotation_residuals(r);
    o <= tol && d <= tol
}

/// Project a nearly orthonormal matrix back onto SO(3) with Gram–Schmidt on
/// its columns (x, then y, then z = x × y).
pub fn reorthonormalize(r: &RotMatrix) -> RotMatrix {
    let x = r.column(0).normalize();
    let y_raw = r.column(1) - x * x.dot(&r.column(1));
    let y = y_raw.normalize();
    let z = x.cross(&y);
    Mat3::from_columns(&[x, y, z])
}

/// Rotation about earth z by `yaw` (counter-clockwise seen from above).
pub fn yaw_rotation(yaw: f64) -> RotMatrix {
    let (s, c) = yaw.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Heading (yaw) that points body-forward (+y) along the horizontal part of `dir`.
pub fn yaw_towards(dir: &Vec3) -> f64 {
    (-dir.x).atan2(dir.y)
}

/// Yaw, pitch, roll for logging, with `R = Rz(yaw) · Rx(pitch) · Ry(roll)`
/// in this crate's body axes (pitch about body x, roll about body y).
pub fn yaw_pitch_roll(r: &RotMatrix) -> (f64, f64, f64) {
    // forward axis in earth frame is column 1
    let fwd = r.column(1);
    let yaw = (-fwd.x).atan2(fwd.y);
    let pitch = fwd.z.clamp(-1.0, 1.0).asin();
    // roll from the right axis elevation relative to the level plane
    let right = r.column(0);
    let up = r.column(2);
    let roll = (-right.z).atan2(up.z);
    (yaw, pitch, roll)
}
