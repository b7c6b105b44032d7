//! From desired velocity to autopilot command `(f_d, ω_d)`.
//!
//! The yaw channel is an image-space PD on the horizontal pixel error. The
//! tilt channel computes the desired lift direction from the desired
//! acceleration, builds the pitch/yaw-only tilt that carries the current lift
//! axis onto it, and steers the body there with the geometric rate law
//! `ω = −vex(R_dᵀR − RᵀR_d)`.
//!
//! Body-axis mapping of the yaw term: image `u` grows toward body +x, so a
//! positive `e_x` (target right of center) needs a clockwise turn seen from
//! above, i.e. a negative rate about body +z (the lift axis). The PD output
//! `w_ψ` therefore enters as `(0, 0, −w_ψ)`.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::MathError;
use crate::mathcore::{rodrigues, sat_vec, Mat3, RotMatrix, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    /// Thrust magnitude, N.
    pub thrust: f64,
    /// Body rate command, rad/s.
    pub omega: Vec3,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FovParams {
    /// Proportional yaw gain, rad/s per px.
    pub k_p: f64,
    /// Derivative yaw gain, rad/s per px/s.
    pub k_d: f64,
    /// Allowed vertical pixel excursion, px.
    pub epsilon: f64,
}

impl Default for FovParams {
    fn default() -> Self {
        Self { k_p: 0.03, k_d: 0.01, epsilon: 60.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlParams {
    pub fov: FovParams,
    /// Horizon `dt` in `a_d = (v_d − v_now)/dt`, s.
    pub accel_horizon: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self { fov: FovParams::default(), accel_horizon: 1.0 }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fov.k_p > 0.0 && self.fov.k_d > 0.0) {
            return Err("yaw PD gains must be positive".into());
        }
        if !(self.fov.epsilon > 0.0) {
            return Err("FOV epsilon must be positive".into());
        }
        if !(self.accel_horizon > 0.0) {
            return Err("acceleration horizon must be positive".into());
        }
        Ok(())
    }
}

/// `w_ψ = k_p e_x + k_d ė_x`.
pub fn yaw_rate_pd(e_x: f64, de_x: f64, params: &FovParams) -> f64 {
    params.k_p * e_x + params.k_d * de_x
}

/// Yaw PD with the self-induced part of `ė_x` resolved in closed form.
///
/// `de_x_other` is the image rate from target motion and tilt; the yaw term
/// contributes `−f(1 + ē_x²)·w` on top, so `w` solves
/// `w = k_p e_x + k_d (de_x_other − f(1 + ē_x²) w)`.
pub fn yaw_rate_pd_resolved(e_x: f64, de_x_other: f64, focal: f64, params: &FovParams) -> f64 {
    let en = e_x / focal;
    let c = focal * (1.0 + en * en);
    (params.k_p * e_x + params.k_d * de_x_other) / (1.0 + params.k_d * c)
}

/// Body-frame rate vector carrying the yaw PD output.
pub fn yaw_rate_vector(w_psi: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, -w_psi)
}

/// Exponential decay rate of `e_x` under the linearized image dynamics with
/// the PD law in the loop, and whether it is positive.
pub fn lambda_check(e_x: f64, v_z_cam: f64, p_tz: f64, focal: f64, params: &FovParams) -> (f64, bool) {
    let en = e_x / focal;
    let c = 1.0 + en * en;
    let lambda = (-v_z_cam / (focal * p_tz) + params.k_p * c) / (1.0 + params.k_d * c);
    (lambda, lambda > 0.0)
}

/// `a_d = (v_d − v_now)/dt`, clipped to norm `a_max`.
pub fn desired_accel(v_d: &Vec3, v_now: &Vec3, dt: f64, a_max: f64) -> Vec3 {
    assert!(dt > 0.0);
    let a = (v_d - v_now) / dt;
    let n = a.norm();
    if n > a_max {
        a * (a_max / n)
    } else {
        a
    }
}

/// Unit lift direction `(a_d − g)/‖a_d − g‖`.
pub fn lift_direction(a_d: &Vec3, gravity: &Vec3) -> Result<Vec3, MathError> {
    let d = a_d - gravity;
    let n = d.norm();
    if n <= 1e-6 {
        return Err(MathError::DegenerateLift(n));
    }
    Ok(d / n)
}

/// Rotation about `n_f × n_fd` by `arccos(n_fᵀ n_fd)` mapping `n_f` onto `n_fd`.
pub fn tilt_rotation(n_f: &Vec3, n_fd: &Vec3) -> RotMatrix {
    let cos_phi = n_f.dot(n_fd).clamp(-1.0, 1.0);
    let phi = cos_phi.acos();
    if phi < 1e-8 {
        return Mat3::identity();
    }
    let cross = n_f.cross(n_fd);
    let axis = if phi > std::f64::consts::PI - 1e-6 || cross.norm() < 1e-12 {
        // antiparallel: any axis orthogonal to n_f; take earth x projected off n_f
        let mut a = Vec3::x() - n_f * n_f.x;
        if a.norm() < 1e-6 {
            a = Vec3::y() - n_f * n_f.y;
        }
        a.normalize()
    } else {
        cross.normalize()
    };
    rodrigues(&axis, phi).expect("axis is unit")
}

/// Geometric attitude law `−vex(R_dᵀR − RᵀR_d)`, body frame.
pub fn attitude_rate(r_d: &RotMatrix, r_be: &RotMatrix) -> Vec3 {
    let m = r_d.transpose() * r_be - r_be.transpose() * r_d;
    // exactly antisymmetric by construction
    -Vec3::new(0.5 * (m[(2, 1)] - m[(1, 2)]), 0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)]))
}

/// Attitude Lyapunov value `tr(I − R_dᵀR)`.
pub fn attitude_lyapunov(r_d: &RotMatrix, r_be: &RotMatrix) -> f64 {
    3.0 - (r_d.transpose() * r_be).trace()
}

/// Saturated rate command and clamped thrust `m·n_fᵀ(a_d − g)`.
pub fn assemble_command(
    omega_tilt: &Vec3,
    w_psi: f64,
    a_d: &Vec3,
    n_f: &Vec3,
    gravity: &Vec3,
    limits: &VehicleParams,
    t: f64,
) -> Command {
    let omega = sat_vec(&(omega_tilt + yaw_rate_vector(w_psi)), limits.max_rate).expect("max_rate > 0");
    let thrust = (limits.mass * n_f.dot(&(a_d - gravity))).clamp(0.0, limits.max_thrust);
    Command { thrust, omega, t }
}

/// Image-plane bound `v0 tan(Δq_y) / tan(α_vfov/2)` on the vertical excursion.
pub fn fov_excursion_bound(dq_y: f64, v0: f64, vfov: f64) -> Result<f64, MathError> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&dq_y) {
        return Err(MathError::Domain("Δq_y must lie in [0, π/2)"));
    }
    if !(vfov > 0.0 && vfov < std::f64::consts::PI) {
        return Err(MathError::Domain("α_vfov must lie in (0, π)"));
    }
    Ok(v0 * dq_y.tan() / (0.5 * vfov).tan())
}

/// Target-in-camera-frame velocity term used by [`lambda_check`]: the camera's
/// own velocity along its optical axis.
pub fn camera_axial_speed(velocity_earth: &Vec3, r_be: &RotMatrix, r_cb: &RotMatrix) -> f64 {
    (r_cb.transpose() * (r_be.transpose() * velocity_earth)).z
}
