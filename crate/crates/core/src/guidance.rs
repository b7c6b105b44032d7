//! Two-plane proportional navigation and the pursuit baseline.
//!
//! The 3-D engagement is split into a vertical plane (elevation angles
//! `q_y`, `σ_y`) and a horizontal plane (azimuth angles `q_z`, `σ_z`), both
//! measured from earth +y (North). PNG turns the desired velocity direction by
//! `K` times the LOS angle change between consecutive guidance ticks.

use serde::{Deserialize, Serialize};

use crate::mathcore::Vec3;

/// Elevation / azimuth of a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneAngles {
    /// Vertical-plane angle (elevation), rad.
    pub y: f64,
    /// Horizontal-plane angle (azimuth from North, positive toward East), rad.
    pub z: f64,
    /// Direction left the open forward half-space (`n_y ≤ 0`), or the
    /// azimuth was undefined and held from the previous sample.
    pub out_of_domain: bool,
}

pub type LosAngles = PlaneAngles;
pub type VelocityAngles = PlaneAngles;

/// Elevation and azimuth of `n`. When the horizontal projection vanishes the
/// azimuth is taken from `previous` and the domain flag is raised.
pub fn plane_angles(n: &Vec3, previous: Option<&PlaneAngles>) -> PlaneAngles {
    let horizontal = n.x.hypot(n.y);
    let y = n.z.atan2(horizontal);
    if horizontal < 1e-12 {
        let z = previous.map_or(0.0, |p| p.z);
        return PlaneAngles { y, z, out_of_domain: true };
    }
    PlaneAngles { y, z: n.x.atan2(n.y), out_of_domain: n.y <= 0.0 }
}

pub fn los_angles(n_t: &Vec3, previous: Option<&LosAngles>) -> LosAngles {
    plane_angles(n_t, previous)
}

/// Velocity angles; a (near) zero velocity holds `previous` and flags it.
pub fn velocity_angles(velocity: &Vec3, previous: Option<&VelocityAngles>) -> VelocityAngles {
    let speed = velocity.norm();
    if speed < 1e-9 {
        return match previous {
            Some(p) => PlaneAngles { out_of_domain: true, ..*p },
            None => PlaneAngles { y: 0.0, z: 0.0, out_of_domain: true },
        };
    }
    plane_angles(&(velocity / speed), previous)
}

/// Unit vector with elevation `y` and azimuth `z`.
pub fn direction_from_angles(y: f64, z: f64) -> Vec3 {
    let (sy, cy) = y.sin_cos();
    let (sz, cz) = z.sin_cos();
    Vec3::new(cy * sz, cy * cz, sy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceParams {
    /// Vertical-plane navigation constant.
    pub nav_gain_y: f64,
    /// Horizontal-plane navigation constant.
    pub nav_gain_z: f64,
    /// Speed increment added per guidance period, m/s.
    pub speed_gain: f64,
    /// Ceiling on the scheduled speed, m/s.
    pub speed_cap: f64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        Self { nav_gain_y: 3.0, nav_gain_z: 3.0, speed_gain: 2.0, speed_cap: 8.0 }
    }
}

impl GuidanceParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.speed_cap > 0.0) {
            return Err("speed cap must be positive".into());
        }
        if !(self.speed_gain >= 0.0) {
            return Err("speed gain must be non-negative".into());
        }
        if !(self.nav_gain_y.is_finite() && self.nav_gain_z.is_finite()) {
            return Err("navigation constants must be finite".into());
        }
        Ok(())
    }

    /// Advisory range checks; returns human-readable warnings.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, k) in [("nav_gain_y", self.nav_gain_y), ("nav_gain_z", self.nav_gain_z)] {
            if !(2.0..=6.0).contains(&k) {
                out.push(format!("{name} = {k} is outside the recommended range [2, 6]"));
            }
        }
        if !(1.0..=3.0).contains(&self.speed_gain) {
            out.push(format!("speed_gain = {} is outside the recommended range [1, 3]", self.speed_gain));
        }
        out
    }
}

/// Previous-tick LOS angles and commanded velocity angles.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GuidanceState {
    prev: Option<(LosAngles, f64, f64)>,
}

impl GuidanceState {
    pub fn is_initialized(&self) -> bool {
        self.prev.is_some()
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}

/// One PNG tick: `σ_d = K (q_k − q_{k−1}) + σ_{k−1}` per plane.
///
/// `σ_{k−1}` is the angle commanded on the previous tick, so the commanded
/// direction integrates the LOS turn. The first call passes `sigma` through
/// and seeds the state.
pub fn png_step(
    state: &mut GuidanceState,
    q: &LosAngles,
    sigma: &VelocityAngles,
    params: &GuidanceParams,
) -> (f64, f64) {
    let out = match state.prev {
        None => (sigma.y, sigma.z),
        Some((q_prev, sy_prev, sz_prev)) => {
            (params.nav_gain_y * (q.y - q_prev.y) + sy_prev, params.nav_gain_z * wrap_pi(q.z - q_prev.z) + sz_prev)
        }
    };
    state.prev = Some((*q, out.0, out.1));
    out
}

fn wrap_pi(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    a - tau * ((a + std::f64::consts::PI) / tau).floor()
}

/// `v_d · n_vd` with `n_vd = (cosσ_y sinσ_z, cosσ_y cosσ_z, sinσ_y)`.
pub fn desired_velocity(sigma_yd: f64, sigma_zd: f64, speed: f64) -> Vec3 {
    direction_from_angles(sigma_yd, sigma_zd) * speed
}

/// Speed ramp `v_d = min(v_now + k_a, v_cap)`.
pub fn speed_schedule(v_now: f64, params: &GuidanceParams) -> f64 {
    (v_now + params.speed_gain).min(params.speed_cap)
}

/// Bound on the LOS excursion induced by the speed ramp, `arctan(k_a / g)`.
pub fn ramp_los_bound(speed_gain: f64, gravity: f64) -> f64 {
    (speed_gain / gravity).atan()
}

/// Pursuit guidance: fly along the LOS.
pub fn pursuit_guidance(n_t: &Vec3, speed: f64) -> Vec3 {
    n_t * speed
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn los_angle_examples() {
        let a = los_angles(&Vec3::y(), None);
        assert_eq!((a.y, a.z, a.out_of_domain), (0.0, 0.0, false));

        let d30 = 30f64.to_radians();
        let a = los_angles(&Vec3::new(0.0, d30.cos(), d30.sin()), None);
        assert_relative_eq!(a.y, std::f64::consts::FRAC_PI_6, epsilon = 1e-4);
        assert_eq!(a.z, 0.0);

        let d20 = 20f64.to_radians();
        let a = los_angles(&Vec3::new(d20.sin(), d20.cos(), 0.0), None);
        // atan(tan 20°)
        assert_relative_eq!(a.z, 0.3491, epsilon = 1e-4);
        assert_eq!(a.y, 0.0);
    }

    #[test]
    fn vertical_los_holds_azimuth() {
        let prev = PlaneAngles { y: 0.1, z: 0.7, out_of_domain: false };
        let a = los_angles(&Vec3::z(), Some(&prev));
        assert!(a.out_of_domain);
        assert_eq!(a.z, 0.7);
        assert_relative_eq!(a.y, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn backward_los_is_flagged() {
        assert!(los_angles(&Vec3::new(0.3, -0.9, 0.1).normalize(), None).out_of_domain);
    }

    #[test]
    fn velocity_angle_examples() {
        let a = velocity_angles(&Vec3::y(), None);
        assert_eq!((a.y, a.z), (0.0, 0.0));

        let prev = PlaneAngles { y: 0.2, z: -0.1, out_of_domain: false };
        let a = velocity_angles(&Vec3::zeros(), Some(&prev));
        assert!(a.out_of_domain);
        assert_eq!((a.y, a.z), (0.2, -0.1));

        let d10 = 10f64.to_radians();
        let a = velocity_angles(&Vec3::new(0.0, d10.cos(), -d10.sin()), None);
        assert_relative_eq!(a.y, -0.1745, epsilon = 1e-4);
    }

    #[test]
    fn png_examples() {
        let params = GuidanceParams::default();
        let mut gs = GuidanceState::default();
        let q0 = PlaneAngles { y: 0.0, z: 0.0, out_of_domain: false };
        let sigma = PlaneAngles { y: 0.1, z: 0.05, out_of_domain: false };
        assert_eq!(png_step(&mut gs, &q0, &sigma, &params), (0.1, 0.05));

        let q1 = PlaneAngles { y: 0.01, ..q0 };
        let (sy, sz) = png_step(&mut gs, &q1, &sigma, &params);
        assert_relative_eq!(sy, 0.13, epsilon = 1e-15);
        assert_eq!(sz, 0.05);

        // zero LOS rate: no further turn
        let (sy2, sz2) = png_step(&mut gs, &q1, &sigma, &params);
        assert_eq!((sy2, sz2), (sy, sz));
    }

    #[test]
    fn desired_velocity_examples() {
        assert_relative_eq!(desired_velocity(0.0, 0.0, 5.0), Vec3::new(0.0, 5.0, 0.0), epsilon = 1e-15);
        let up = desired_velocity(std::f64::consts::FRAC_PI_2 - 1e-9, 0.0, 1.0);
        assert!((up - Vec3::z()).norm() < 1e-8);
        assert!((desired_velocity(0.3, -0.2, 4.0).norm() - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn speed_schedule_examples() {
        let p = GuidanceParams::default();
        assert_eq!(speed_schedule(0.0, &p), 2.0);
        assert_eq!(speed_schedule(p.speed_cap, &p), p.speed_cap);
        assert_relative_eq!(ramp_los_bound(2.0, 9.8), 0.2013, epsilon = 1e-4);
    }

    #[test]
    fn pursuit_examples() {
        assert_eq!(pursuit_guidance(&Vec3::y(), 3.0), Vec3::new(0.0, 3.0, 0.0));
    }

    #[test]
    fn gain_warnings() {
        assert!(GuidanceParams::default().warnings().is_empty());
        let p = GuidanceParams { nav_gain_y: 1.0, ..Default::default() };
        assert_eq!(p.warnings().len(), 1);
    }

    proptest! {
        #[test]
        fn commanded_direction_is_unit(y in -1.5..1.5f64, z in -3.0..3.0f64) {
            prop_assert!((direction_from_angles(y, z).norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn angles_round_trip(y in -1.5..1.5f64, z in -1.5..1.5f64) {
            let a = plane_angles(&direction_from_angles(y, z), None);
            prop_assert!((a.y - y).abs() <= 1e-9 && (a.z - z).abs() <= 1e-9);
            prop_assert!(!a.out_of_domain);
        }

        #[test]
        fn constant_los_keeps_command(y in -1.0..1.0f64, z in -1.0..1.0f64, sy in -1.0..1.0f64, sz in -1.0..1.0f64) {
            let params = GuidanceParams::default();
            let mut gs = GuidanceState::default();
            let q = PlaneAngles { y, z, out_of_domain: false };
            let s = PlaneAngles { y: sy, z: sz, out_of_domain: false };
            let first = png_step(&mut gs, &q, &s, &params);
            for _ in 0..5 {
                prop_assert_eq!(png_step(&mut gs, &q, &s, &params), first);
            }
        }
    }
}
