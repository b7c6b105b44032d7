//! Interceptor rigid-body propagation, scripted target motion and a
//! Gauss–Markov wind disturbance.
//!
//! The translational model is the full point-mass law `v̇ = g + (f/m) n_f`.
//! The moment dynamics are replaced by a first-order body-rate tracker
//! `ω̇ = (ω_d − ω)/τ_ω`, standing in for the autopilot's inner rate loop.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::control::Command;
use crate::error::DynamicsError;
use crate::mathcore::{exp_so3, reorthonormalize, RotMatrix, Vec3};

/// Largest accepted physics step.
pub const MAX_PHYSICS_DT: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Body-to-earth rotation.
    pub r_be: RotMatrix,
    /// Body angular rate, body frame.
    pub omega: Vec3,
    pub t: f64,
}

impl VehicleState {
    pub fn at_rest(position: Vec3, r_be: RotMatrix) -> Self {
        Self { position, velocity: Vec3::zeros(), r_be, omega: Vec3::zeros(), t: 0.0 }
    }

    /// Lift direction in the earth frame (body +z).
    pub fn lift_axis(&self) -> Vec3 {
        self.r_be.column(2).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.r_be.iter().all(|x| x.is_finite())
            && self.omega.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Mass, kg.
    pub mass: f64,
    /// Maximum lift, N.
    pub max_thrust: f64,
    /// Maximum body-rate command norm, rad/s.
    pub max_rate: f64,
    /// Time constant of the body-rate tracking lag, s.
    pub rate_time_constant: f64,
    /// Hard speed limit enforced by the autopilot, m/s.
    pub max_speed: f64,
    /// Acceleration command limit, m/s².
    pub max_accel: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            // thrust-to-weight of 3
            max_thrust: 3.0 * 1.5 * 9.8,
            max_rate: 4.0,
            rate_time_constant: 0.05,
            max_speed: 12.0,
            max_accel: 5.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let all_positive = [self.mass, self.max_thrust, self.max_rate, self.max_speed, self.max_accel]
            .iter()
            .all(|x| *x > 0.0 && x.is_finite());
        if !all_positive || !(self.rate_time_constant >= 0.0) {
            return Err("vehicle parameters must be positive".into());
        }
        if self.max_thrust / self.mass < crate::mathcore::GRAVITY {
            return Err(format!("vehicle cannot hover: max_thrust/mass = {:.3} < 9.8", self.max_thrust / self.mass));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub t: f64,
}

/// Scripted target maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Maneuver {
    Static,
    ConstantVelocity {
        velocity: [f64; 3],
    },
    ConstantAcceleration {
        acceleration: [f64; 3],
    },
    /// Lateral sinusoid along earth x with a constant drift along earth y.
    Sinusoidal {
        amplitude: f64,
        period: f64,
        drift: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionModel {
    pub initial_position: [f64; 3],
    pub maneuver: Maneuver,
}

impl MotionModel {
    pub fn new(initial_position: Vec3, maneuver: Maneuver) -> Self {
        Self { initial_position: initial_position.into(), maneuver }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Maneuver::Sinusoidal { period, .. } = self.maneuver {
            if !(period > 0.0) {
                return Err("sinusoidal maneuver period must be positive".into());
            }
        }
        Ok(())
    }
}

/// Closed-form target state at time `t`. Stateless in `t`.
pub fn step_target(model: &MotionModel, t: f64) -> TargetState {
    let p0 = Vec3::from(model.initial_position);
    let (position, velocity, acceleration) = match model.maneuver {
        Maneuver::Static => (p0, Vec3::zeros(), Vec3::zeros()),
        Maneuver::ConstantVelocity { velocity } => {
            let v = Vec3::from(velocity);
            (p0 + v * t, v, Vec3::zeros())
        }
        Maneuver::ConstantAcceleration { acceleration } => {
            let a = Vec3::from(acceleration);
            (p0 + 0.5 * a * t * t, a * t, a)
        }
        Maneuver::Sinusoidal { amplitude, period, drift } => {
            let w = std::f64::consts::TAU / period;
            let (s, c) = (w * t).sin_cos();
            (
                p0 + Vec3::new(amplitude * s, drift * t, 0.0),
                Vec3::new(amplitude * w * c, drift, 0.0),
                Vec3::new(-amplitude * w * w * s, 0.0, 0.0),
            )
        }
    };
    TargetState { position, velocity, acceleration, t }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindModel {
    /// Mean wind velocity, m/s (earth frame).
    pub mean: [f64; 3],
    /// Per-axis gust standard deviation, m/s.
    pub gust_std: f64,
    /// Gust correlation time, s.
    pub correlation_time: f64,
    /// Drag coefficient of the interceptor, 1/s.
    pub vehicle_drag: f64,
    /// Drag coefficient of the target, 1/s.
    pub target_drag: f64,
    /// Restoring stiffness pulling a displaced target back to its scripted
    /// path (a tethered balloon), 1/s².
    pub target_tether: f64,
}

impl Default for WindModel {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            gust_std: 0.0,
            correlation_time: 2.0,
            vehicle_drag: 0.05,
            target_drag: 1.0,
            target_tether: 0.5,
        }
    }
}

impl WindModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gust_std >= 0.0) || !(self.correlation_time > 0.0) {
            return Err("wind gust std must be ≥ 0 and correlation time > 0".into());
        }
        if !(self.vehicle_drag >= 0.0 && self.target_drag >= 0.0 && self.target_tether >= 0.0) {
            return Err("wind drag and tether coefficients must be ≥ 0".into());
        }
        Ok(())
    }
}

/// Time-varying wind: mean plus a first-order Gauss–Markov gust.
#[derive(Debug, Clone)]
pub struct WindField {
    pub model: WindModel,
    gust: Vec3,
}

impl WindField {
    pub fn new(model: WindModel) -> Self {
        Self { model, gust: Vec3::zeros() }
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::from(self.model.mean) + self.gust
    }

    /// Advance the gust process by `dt`. Draws nothing when `gust_std` is 0.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        if self.model.gust_std == 0.0 {
            return;
        }
        let phi = (-dt / self.model.correlation_time).exp();
        let scale = self.model.gust_std * (1.0 - phi * phi).sqrt();
        for i in 0..3 {
            let n: f64 = rng.sample(StandardNormal);
            self.gust[i] = phi * self.gust[i] + scale * n;
        }
    }
}

/// Wind-induced displacement of the target away from its scripted path.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TargetDrift {
    pub offset: Vec3,
    pub velocity: Vec3,
}

impl TargetDrift {
    /// Semi-implicit Euler step of `d̈ = c (w − v_T − ḋ) − k d`.
    pub fn step(&mut self, scripted_velocity: &Vec3, wind: &Vec3, model: &WindModel, dt: f64) {
        let air = wind - scripted_velocity - self.velocity;
        let accel = model.target_drag * air - model.target_tether * self.offset;
        self.velocity += accel * dt;
        self.offset += self.velocity * dt;
    }
}

/// One physics step of the interceptor.
///
/// Body rate follows the exact solution of the first-order lag over the step;
/// attitude is advanced with the exponential map of the step-averaged rate;
/// position and velocity use RK4 with the lift axis interpolated along that
/// rotation.
pub fn step_vehicle(
    state: &VehicleState,
    cmd: &Command,
    params: &VehicleParams,
    gravity: &Vec3,
    wind_velocity: &Vec3,
    drag: f64,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_PHYSICS_DT) {
        return Err(DynamicsError::BadStep(dt));
    }
    let tau = params.rate_time_constant;
    let (omega_end, omega_avg) = if tau <= 0.0 {
        (cmd.omega, cmd.omega)
    } else {
        let decay = (-dt / tau).exp();
        let err = state.omega - cmd.omega;
        (cmd.omega + err * decay, cmd.omega + err * (tau / dt) * (1.0 - decay))
    };

    let r0 = state.r_be;
    let lift_at = |frac: f64| -> Vec3 { (r0 * exp_so3(&(omega_avg * dt * frac))).column(2).into_owned() };
    let thrust_acc = cmd.thrust / params.mass;
    let accel = |frac: f64, v: &Vec3| -> Vec3 { gravity + lift_at(frac) * thrust_acc + drag * (wind_velocity - v) };

    let (p, v) = (state.position, state.velocity);
    let k1v = accel(0.0, &v);
    let k1p = v;
    let v2 = v + k1v * (0.5 * dt);
    let k2v = accel(0.5, &v2);
    let k2p = v2;
    let v3 = v + k2v * (0.5 * dt);
    let k3v = accel(0.5, &v3);
    let k3p = v3;
    let v4 = v + k3v * dt;
    let k4v = accel(1.0, &v4);
    let k4p = v4;

    let mut velocity = v + (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (dt / 6.0);
    let position = p + (k1p + 2.0 * k2p + 2.0 * k3p + k4p) * (dt / 6.0);
    let speed = velocity.norm();
    if speed > params.max_speed {
        velocity *= params.max_speed / speed;
    }

    let next = VehicleState {
        position,
        velocity,
        r_be: reorthonormalize(&(r0 * exp_so3(&(omega_avg * dt)))),
        omega: omega_end,
        t: state.t + dt,
    };
    if !next.is_finite() {
        return Err(DynamicsError::Diverged(next.t));
    }
    Ok(next)
}

/// Relative geometry between interceptor and target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub range: f64,
    /// d‖p_r‖/dt; negative while closing.
    pub closing_rate: f64,
    /// Range is exactly zero.
    pub coincident: bool,
}

pub fn relative_state(vehicle: &VehicleState, target: &TargetState) -> RelativeState {
    let position = target.position - vehicle.position;
    let velocity = target.velocity - vehicle.velocity;
    let range = position.norm();
    if range == 0.0 {
        return RelativeState { position, velocity, range, closing_rate: 0.0, coincident: true };
    }
    RelativeState { position, velocity, range, closing_rate: position.dot(&velocity) / range, coincident: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::{is_rotation, rodrigues, yaw_pitch_roll, Mat3};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g() -> Vec3 {
        Vec3::new(0.0, 0.0, -9.8)
    }

    fn cmd(thrust: f64, omega: Vec3) -> Command {
        Command { thrust, omega, t: 0.0 }
    }

    #[test]
    fn hover_holds_still() {
        let params = VehicleParams::default();
        let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 10.0), Mat3::identity());
        let c = cmd(params.mass * 9.8, Vec3::zeros());
        for _ in 0..100 {
            let next = step_vehicle(&s, &c, &params, &g(), &Vec3::zeros(), 0.0, 0.002).unwrap();
            assert!((next.velocity - s.velocity).norm() <= 1e-9);
            s = next;
        }
        assert!(s.velocity.norm() < 1e-9);
    }

    #[test]
    fn free_fall_matches_ballistic() {
        let params = VehicleParams::default();
        let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, 10.0), Mat3::identity());
        let c = cmd(0.0, Vec3::zeros());
        for _ in 0..1000 {
            s = step_vehicle(&s, &c, &params, &g(), &Vec3::zeros(), 0.0, 0.001).unwrap();
        }
        assert!((s.velocity.z + 9.8).abs() <= 1e-6);
        // closed form z = 10 − ½ g t²
        assert!((s.position.z - (10.0 - 4.9)).abs() <= 1e-6);
        assert!((s.t - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_yaw_rate_advances_heading() {
        let params = VehicleParams { rate_time_constant: 0.0, ..Default::default() };
        let mut s = VehicleState::at_rest(Vec3::zeros(), Mat3::identity());
        let c = cmd(params.mass * 9.8, Vec3::new(0.0, 0.0, 1.0));
        for _ in 0..500 {
            s = step_vehicle(&s, &c, &params, &g(), &Vec3::zeros(), 0.0, 0.002).unwrap();
            assert!(is_rotation(&s.r_be, 1e-8));
        }
        let expected = rodrigues(&Vec3::z(), 1.0).unwrap();
        assert!((s.r_be - expected).norm() < 1e-9);
        let (yaw, _, _) = yaw_pitch_roll(&s.r_be);
        assert_relative_eq!(yaw, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rate_lag_converges_to_command() {
        let params = VehicleParams::default();
        let mut s = VehicleState::at_rest(Vec3::zeros(), Mat3::identity());
        let c = cmd(params.mass * 9.8, Vec3::new(0.3, -0.2, 0.5));
        for _ in 0..250 {
            s = step_vehicle(&s, &c, &params, &g(), &Vec3::zeros(), 0.0, 0.002).unwrap();
        }
        // 10 time constants
        assert!((s.omega - c.omega).norm() < 1e-4 * c.omega.norm());
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        let params = VehicleParams::default();
        let s = VehicleState::at_rest(Vec3::zeros(), Mat3::identity());
        let c = cmd(0.0, Vec3::zeros());
        assert!(step_vehicle(&s, &c, &params, &g(), &Vec3::zeros(), 0.0, 0.05).is_err());
        let bad = cmd(f64::NAN, Vec3::zeros());
        assert!(matches!(
            step_vehicle(&s, &bad, &params, &g(), &Vec3::zeros(), 0.0, 0.002),
            Err(DynamicsError::Diverged(_))
        ));
    }

    #[test]
    fn random_commands_keep_so3() {
        let params = VehicleParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = VehicleState::at_rest(Vec3::zeros(), Mat3::identity());
        for i in 0..100_000 {
            if i % 50 == 0 {
                let w =
                    Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let c = cmd(params.mass * 9.8, crate::mathcore::sat_vec(&(w * 4.0), params.max_rate).unwrap());
                s.omega = c.omega;
            }
            let c = cmd(params.mass * 9.8, s.omega);
            s = step_vehicle(&s, &c, &params, &g(), &Vec3::zeros(), 0.0, 0.002).unwrap();
            s.velocity = Vec3::zeros();
            assert!(is_rotation(&s.r_be, 1e-8), "step {i}");
        }
    }

    #[test]
    fn target_examples() {
        let ca = MotionModel::new(Vec3::zeros(), Maneuver::ConstantAcceleration { acceleration: [0.8, 0.0, 0.2] });
        let s = step_target(&ca, 1.0);
        assert_relative_eq!(s.position, Vec3::new(0.4, 0.0, 0.1), epsilon = 1e-15);

        let sm = MotionModel::new(Vec3::zeros(), Maneuver::Sinusoidal { amplitude: 2.0, period: 14.0, drift: 3.0 });
        let s = step_target(&sm, 3.5);
        assert_relative_eq!(s.position, Vec3::new(2.0, 10.5, 0.0), epsilon = 1e-12);

        let st = MotionModel::new(Vec3::new(1.0, 2.0, 3.0), Maneuver::Static);
        let s = step_target(&st, 42.0);
        assert_eq!(s.position, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(s.velocity, Vec3::zeros());
    }

    #[test]
    fn target_derivatives_match_finite_differences() {
        let models = [
            Maneuver::ConstantVelocity { velocity: [0.0, 0.0, 1.0] },
            Maneuver::ConstantAcceleration { acceleration: [0.8, 0.0, 0.2] },
            Maneuver::Sinusoidal { amplitude: 2.0, period: 14.0, drift: 3.0 },
        ];
        let h = 1e-5;
        for m in models {
            let model = MotionModel::new(Vec3::new(0.0, 25.0, 1.0), m);
            for &t in &[0.5, 2.0, 7.3] {
                let fd_v = (step_target(&model, t + h).position - step_target(&model, t - h).position) / (2.0 * h);
                let fd_a = (step_target(&model, t + h).velocity - step_target(&model, t - h).velocity) / (2.0 * h);
                let s = step_target(&model, t);
                assert!((fd_v - s.velocity).norm() < 1e-6);
                assert!((fd_a - s.acceleration).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn step_target_is_stateless() {
        let model = MotionModel::new(Vec3::zeros(), Maneuver::Sinusoidal { amplitude: 2.0, period: 14.0, drift: 3.0 });
        let direct = step_target(&model, 5.123);
        for i in 0..100 {
            let _ = step_target(&model, i as f64 * 0.05);
        }
        assert_eq!(step_target(&model, 5.123), direct);
    }

    #[test]
    fn relative_state_examples() {
        let v = VehicleState::at_rest(Vec3::zeros(), Mat3::identity());
        let t = TargetState { position: Vec3::zeros(), velocity: Vec3::zeros(), acceleration: Vec3::zeros(), t: 0.0 };
        let r = relative_state(&v, &t);
        assert!(r.coincident && r.range == 0.0 && r.closing_rate == 0.0);

        let t = TargetState { position: Vec3::new(0.0, 10.0, 0.0), velocity: Vec3::new(0.0, -2.0, 0.0), ..t };
        let r = relative_state(&v, &t);
        assert_eq!(r.range, 10.0);
        assert_eq!(r.closing_rate, -2.0);
    }

    #[test]
    fn closing_rate_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..200 {
            let mut r = || {
                Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0))
            };
            let (pm, vm, pt, vt) = (r(), r(), r(), r());
            let veh = VehicleState { position: pm, velocity: vm, r_be: Mat3::identity(), omega: Vec3::zeros(), t: 0.0 };
            let tgt = TargetState { position: pt, velocity: vt, acceleration: Vec3::zeros(), t: 0.0 };
            let rel = relative_state(&veh, &tgt);
            if rel.range < 1.0 {
                continue;
            }
            let fwd = ((pt + vt * h) - (pm + vm * h)).norm();
            let back = ((pt - vt * h) - (pm - vm * h)).norm();
            let fd = (fwd - back) / (2.0 * h);
            assert!((fd - rel.closing_rate).abs() <= 1e-4 * rel.closing_rate.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_gust_is_deterministic() {
        let model = WindModel { mean: [1.0, 0.0, 0.0], vehicle_drag: 0.2, ..Default::default() };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut w = WindField::new(model);
            let params = VehicleParams::default();
            let mut s = VehicleState::at_rest(Vec3::zeros(), Mat3::identity());
            let c = cmd(params.mass * 9.8, Vec3::zeros());
            for _ in 0..500 {
                w.advance(0.002, &mut rng);
                s = step_vehicle(&s, &c, &params, &g(), &w.velocity(), model.vehicle_drag, 0.002).unwrap();
            }
            s
        };
        let (a, b) = (run(), run());
        assert_eq!(a.position, b.position);
        assert!(a.velocity.x > 0.0);
    }

    #[test]
    fn gust_process_has_requested_spread() {
        let model = WindModel { gust_std: 2.0, correlation_time: 0.05, ..Default::default() };
        let mut w = WindField::new(model);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sum2 = 0.0;
        let n = 200_000;
        for _ in 0..n {
            w.advance(0.01, &mut rng);
            sum2 += w.velocity().x.powi(2);
        }
        let std = (sum2 / n as f64).sqrt();
        assert!((std - 2.0).abs() < 0.1, "std {std}");
    }
}
