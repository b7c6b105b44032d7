//! Single-engagement orchestration.
//!
//! Per control tick: sample the camera (capture + delayed delivery), advance
//! the DKF to the tick and fold in any delivered detection, run guidance and
//! the attitude loop, log a [`StepRecord`], then integrate the physics over
//! the control period. Interception is checked at physics resolution.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Controller, ScenarioConfig};
use crate::control::{
    assemble_command, attitude_rate, camera_axial_speed, desired_accel, lambda_check, lift_direction, tilt_rotation,
    yaw_rate_pd_resolved, Command,
};
use crate::dynamics::{relative_state, step_target, step_vehicle, TargetDrift, TargetState, VehicleState, WindField};
use crate::error::ConfigError;
use crate::filter::{Dkf, PixelEstimate, PixelShift};
use crate::guidance::{
    desired_velocity, los_angles, png_step, pursuit_guidance, speed_schedule, velocity_angles, GuidanceState, LosAngles,
};
use crate::mathcore::{yaw_pitch_roll, yaw_rotation, yaw_towards, RotMatrix, Vec3};
use crate::monitor::{monitors, FrameSample, MonitorReport};
use crate::sensor::{
    add_pixel_noise, camera_frame, los_from_pixels, project, rotation_pixel_shift, rotational_image_rate,
    CameraIntrinsics, LatencyQueue,
};

/// Stable 64-bit mixer (SplitMix64 finalizer over `seed + stream·φ`).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SENSOR_STREAM: u64 = 1;
const WIND_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Intercepted,
    FovLost,
    Timeout,
    Diverged,
}

/// One logged control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepRecord {
    pub t: f64,
    pub vehicle_position: Vec3,
    pub vehicle_velocity: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub target_position: Vec3,
    pub range: f64,
    pub closing_rate: f64,
    /// Estimated LOS elevation / azimuth (from the DKF), rad.
    pub q_y: f64,
    pub q_z: f64,
    /// True LOS elevation, rad.
    pub q_y_true: f64,
    /// True LOS angular rate magnitude, rad/s.
    pub los_rate: f64,
    pub e_x_true: f64,
    pub e_y_true: f64,
    pub e_x_est: f64,
    pub e_y_est: f64,
    pub de_x_est: f64,
    pub thrust: f64,
    pub omega_cmd: Vec3,
    /// Vehicle acceleration normal to its velocity, m/s².
    pub normal_accel: f64,
    /// Vehicle velocity normal to the LOS, m/s.
    pub normal_velocity: f64,
    pub fov_valid: bool,
    pub l2: f64,
    pub lambda: f64,
    pub lambda_ok: bool,
    /// Angle between vehicle velocity and LOS, rad.
    pub lead_angle: f64,
}

/// CSV column order of [`StepRecord`].
pub const STEP_COLUMNS: &[&str] = &[
    "t",
    "px",
    "py",
    "pz",
    "vx",
    "vy",
    "vz",
    "yaw",
    "pitch",
    "roll",
    "tx",
    "ty",
    "tz",
    "range",
    "closing_rate",
    "q_y",
    "q_z",
    "q_y_true",
    "los_rate",
    "e_x_true",
    "e_y_true",
    "e_x_est",
    "e_y_est",
    "de_x_est",
    "thrust",
    "wx",
    "wy",
    "wz",
    "normal_accel",
    "normal_velocity",
    "fov_valid",
    "l2",
    "lambda",
    "lambda_ok",
];

/// Format with 9 significant digits; plain notation when it stays readable.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

impl StepRecord {
    fn fields(&self) -> Vec<String> {
        let b = |v: bool| if v { "1".to_string() } else { "0".to_string() };
        let mut out = vec![sig9(self.t)];
        out.extend(self.vehicle_position.iter().map(|x| sig9(*x)));
        out.extend(self.vehicle_velocity.iter().map(|x| sig9(*x)));
        out.extend([self.yaw, self.pitch, self.roll].iter().map(|x| sig9(*x)));
        out.extend(self.target_position.iter().map(|x| sig9(*x)));
        for x in [
            self.range,
            self.closing_rate,
            self.q_y,
            self.q_z,
            self.q_y_true,
            self.los_rate,
            self.e_x_true,
            self.e_y_true,
            self.e_x_est,
            self.e_y_est,
            self.de_x_est,
            self.thrust,
        ] {
            out.push(sig9(x));
        }
        out.extend(self.omega_cmd.iter().map(|x| sig9(*x)));
        out.push(sig9(self.normal_accel));
        out.push(sig9(self.normal_velocity));
        out.push(b(self.fov_valid));
        out.push(sig9(self.l2));
        out.push(sig9(self.lambda));
        out.push(b(self.lambda_ok));
        out
    }
}

/// Write records as RFC-4180 CSV with a header row.
pub fn write_steps_csv<W: Write>(records: &[StepRecord], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STEP_COLUMNS)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub controller: Controller,
    pub outcome: Outcome,
    /// Minimum interpolated range, m.
    pub miss_distance_m: f64,
    pub time_of_closest_approach_s: f64,
    pub terminal_speed_mps: f64,
    pub max_rate_cmd: f64,
    pub duration_s: f64,
    pub dkf_skipped: u64,
    pub monitors: MonitorReport,
}

impl RunSummary {
    /// Pretty JSON with lexicographically sorted keys.
    pub fn to_json(&self) -> String {
        sorted_json(self)
    }
}

/// Serialize through `serde_json::Value`, whose map is ordered by key.
pub fn sorted_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("summary types serialize");
    serde_json::to_string_pretty(&v).expect("value serializes")
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<StepRecord>,
    pub frames: Vec<FrameSample>,
}

/// Closest approach from the logged samples: the minimum-range sample,
/// refined by point-to-segment distance on the adjacent segments of the
/// relative trajectory. Returns `(miss, time)`.
pub fn miss_distance(records: &[StepRecord]) -> (f64, f64) {
    assert!(!records.is_empty(), "miss_distance needs at least one record");
    let rel = |r: &StepRecord| r.target_position - r.vehicle_position;
    let (imin, _) =
        records
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, r)| if r.range < acc.1 { (i, r.range) } else { acc });
    let mut best = (records[imin].range, records[imin].t);
    let lo = imin.saturating_sub(1);
    let hi = (imin + 1).min(records.len() - 1);
    for i in lo..hi {
        let (a, b) = (&records[i], &records[i + 1]);
        let (pa, pb) = (rel(a), rel(b));
        let d = pb - pa;
        let dd = d.norm_squared();
        let s = if dd > 0.0 { (-pa.dot(&d) / dd).clamp(0.0, 1.0) } else { 0.0 };
        let dist = (pa + d * s).norm();
        if dist < best.0 {
            best = (dist, a.t + s * (b.t - a.t));
        }
    }
    best
}

struct Aux {
    q: Option<LosAngles>,
    est: Option<PixelEstimate>,
    cmd: Command,
}

struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    cam: CameraIntrinsics,
    gravity: Vec3,
    queue: LatencyQueue,
    dkf: Dkf,
    guidance: GuidanceState,
    wind: WindField,
    drift: TargetDrift,
    sensor_rng: ChaCha8Rng,
    wind_rng: ChaCha8Rng,
    vehicle: VehicleState,
    /// Attitude at the previous control tick.
    r_prev: RotMatrix,
    prev_velocity: Vec3,
    prev_q: Option<LosAngles>,
    records: Vec<StepRecord>,
    frames: Vec<FrameSample>,
    last_valid_capture: f64,
    command: Option<Command>,
    outcome: Option<Outcome>,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let cam = cfg.camera.intrinsics();
        let p0 = Vec3::from(cfg.initial.position);
        let target0 = step_target(&cfg.target, 0.0).position;
        let yaw = match cfg.initial.yaw_deg {
            Some(d) => d.to_radians(),
            None => yaw_towards(&(target0 - p0)),
        };
        let mut vehicle = VehicleState::at_rest(p0, yaw_rotation(yaw));
        vehicle.velocity = Vec3::from(cfg.initial.velocity);
        let span = (2.0 * cfg.camera.latency_s).max(4.0 / cfg.rates.control_hz);
        Self {
            cfg,
            cam,
            gravity: Vec3::new(0.0, 0.0, -crate::mathcore::GRAVITY),
            queue: LatencyQueue::new(cfg.camera.rate_hz, cfg.camera.latency_s),
            dkf: Dkf::new(cfg.dkf, (cam.u0, cam.v0), span),
            guidance: GuidanceState::default(),
            wind: WindField::new(cfg.wind),
            drift: TargetDrift::default(),
            sensor_rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SENSOR_STREAM)),
            wind_rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, WIND_STREAM)),
            prev_velocity: vehicle.velocity,
            r_prev: vehicle.r_be,
            vehicle,
            prev_q: None,
            records: Vec::new(),
            frames: Vec::new(),
            last_valid_capture: 0.0,
            command: None,
            outcome: None,
        }
    }

    fn target_at(&self, t: f64) -> TargetState {
        let mut s = step_target(&self.cfg.target, t);
        s.position += self.drift.offset;
        s.velocity += self.drift.velocity;
        s
    }

    fn execute(&mut self) {
        let dt = self.cfg.control_dt();
        let max_ticks = (self.cfg.max_duration_s / dt).ceil() as u64;
        for k in 0..=max_ticks {
            let t = k as f64 * dt;
            self.vehicle.t = t;
            if self.control_tick(k, t) {
                return;
            }
            if k == max_ticks {
                break;
            }
            if self.integrate() {
                return;
            }
        }
        self.outcome = Some(Outcome::Timeout);
    }

    /// Returns true when the run terminates at this tick.
    fn control_tick(&mut self, k: u64, t: f64) -> bool {
        let tgt = self.target_at(t);
        let rel = relative_state(&self.vehicle, &tgt);

        let clean = project(&tgt.position, &self.vehicle, &self.cam);
        if rel.range <= self.cfg.capture_radius_m {
            let aux = Aux { q: self.prev_q, est: self.dkf.estimate().ok(), cmd: self.hover_command(t) };
            let rec = self.record(t, &tgt, &aux);
            self.records.push(rec);
            self.outcome = Some(Outcome::Intercepted);
            return true;
        }

        let sigma = self.cfg.camera.pixel_noise_std;
        let cam = self.cam;
        let rng = &mut self.sensor_rng;
        let tick = self.queue.tick(t, |_| add_pixel_noise(&clean, sigma, &cam, rng));
        if let Some(obs) = tick.captured {
            self.frames.push(FrameSample { t, valid: clean.valid, e_y: clean.e_y, range: rel.range });
            if obs.valid {
                self.last_valid_capture = t;
            }
        }

        if k > 0 {
            // the filter tracks target motion only; own rotation enters as a known shift
            let dt = self.cfg.control_dt();
            let (x, _) = self.dkf.state();
            let (u, v) = (x[0] + x[2] * dt, x[1] + x[3] * dt);
            let shift = rotation_pixel_shift(u, v, &self.r_prev, &self.vehicle.r_be, &self.cam)
                .map_or(PixelShift::zeros(), |(du, dv)| PixelShift::new(du, dv));
            self.dkf.predict_with_input(dt, &shift);
        }
        self.r_prev = self.vehicle.r_be;
        if let Some(z) = tick.delivered {
            self.dkf.update_delayed(&z);
        }

        let aux = match self.dkf.estimate() {
            Ok(est) => self.guided_command(t, &est),
            Err(_) => Aux { q: None, est: None, cmd: self.hover_command(t) },
        };
        let rec = self.record(t, &tgt, &aux);
        self.records.push(rec);
        self.command = Some(aux.cmd);

        if t - self.last_valid_capture > self.cfg.fov_grace_s {
            self.outcome = Some(Outcome::FovLost);
            return true;
        }
        false
    }

    fn hover_command(&self, t: f64) -> Command {
        self.attitude_command(&Vec3::zeros(), 0.0, t)
    }

    fn attitude_command(&self, v_d: &Vec3, w_psi: f64, t: f64) -> Command {
        let (a_d, w_tilt) = self.tilt(v_d);
        self.assemble(&a_d, &w_tilt, w_psi, t)
    }

    /// Desired acceleration and the tilt-only body rate.
    fn tilt(&self, v_d: &Vec3) -> (Vec3, Vec3) {
        let v = &self.vehicle;
        let a_d = desired_accel(v_d, &v.velocity, self.cfg.control.accel_horizon, self.cfg.vehicle.max_accel);
        let n_f = v.lift_axis();
        let n_fd = lift_direction(&a_d, &self.gravity).unwrap_or(n_f);
        let r_d = tilt_rotation(&n_f, &n_fd) * v.r_be;
        (a_d, attitude_rate(&r_d, &v.r_be))
    }

    fn assemble(&self, a_d: &Vec3, w_tilt: &Vec3, w_psi: f64, t: f64) -> Command {
        let n_f = self.vehicle.lift_axis();
        assemble_command(w_tilt, w_psi, a_d, &n_f, &self.gravity, &self.cfg.vehicle, t)
    }

    fn guided_command(&mut self, t: f64, est: &PixelEstimate) -> Aux {
        let n_t = los_from_pixels(est.e_x, est.e_y, self.cam.focal, &self.vehicle.r_be, &self.cam.r_cb);
        let q = los_angles(&n_t, self.prev_q.as_ref());
        self.prev_q = Some(q);
        let velocity = self.vehicle.velocity;
        let speed = velocity.norm();
        let v_mag = speed_schedule(speed, &self.cfg.guidance);
        let v_d = match self.cfg.controller {
            Controller::Proposed => {
                // at rest the velocity angles are undefined; seed from the LOS
                let sigma = if speed > 0.5 { velocity_angles(&velocity, Some(&q)) } else { q };
                let (sy, sz) = png_step(&mut self.guidance, &q, &sigma, &self.cfg.guidance);
                desired_velocity(sy, sz, v_mag)
            }
            Controller::Pg => pursuit_guidance(&n_t, v_mag),
        };
        let (a_d, w_tilt) = self.tilt(&v_d);
        let (de_tilt, _) = rotational_image_rate(est.e_x, est.e_y, self.cam.focal, &w_tilt, &self.cam.r_cb);
        let w_psi = yaw_rate_pd_resolved(est.e_x, est.de_x + de_tilt, self.cam.focal, &self.cfg.control.fov);
        Aux { q: Some(q), est: Some(*est), cmd: self.assemble(&a_d, &w_tilt, w_psi, t) }
    }

    fn record(&self, t: f64, tgt: &TargetState, aux: &Aux) -> StepRecord {
        let v = &self.vehicle;
        let rel = relative_state(v, tgt);
        let (yaw, pitch, roll) = yaw_pitch_roll(&v.r_be);
        let clean = project(&tgt.position, v, &self.cam);
        let p_c = camera_frame(&tgt.position, v, &self.cam);
        let los = if rel.range > 0.0 { rel.position / rel.range } else { Vec3::zeros() };
        let los_rate =
            if rel.range > 0.0 { rel.position.cross(&rel.velocity).norm() / (rel.range * rel.range) } else { 0.0 };
        let q_true = los_angles(&los, None);

        let dt = self.cfg.control_dt();
        let accel = (v.velocity - self.prev_velocity) / dt;
        let speed = v.velocity.norm();
        let normal_accel = if speed > 1e-6 {
            let dir = v.velocity / speed;
            (accel - dir * accel.dot(&dir)).norm()
        } else {
            accel.norm()
        };
        let normal_velocity = (v.velocity - los * v.velocity.dot(&los)).norm();
        let lead_angle =
            if speed > 1e-6 && rel.range > 0.0 { (v.velocity.dot(&los) / speed).clamp(-1.0, 1.0).acos() } else { 0.0 };

        let e_x_true = if clean.e_x.is_finite() { clean.e_x } else { f64::NAN };
        let (lambda, lambda_ok) = if p_c.z > 0.0 {
            let vz = camera_axial_speed(&v.velocity, &v.r_be, &self.cam.r_cb);
            lambda_check(e_x_true, vz, p_c.z, self.cam.focal, &self.cfg.control.fov)
        } else {
            (f64::NAN, false)
        };
        let nan = f64::NAN;
        StepRecord {
            t,
            vehicle_position: v.position,
            vehicle_velocity: v.velocity,
            yaw,
            pitch,
            roll,
            target_position: tgt.position,
            range: rel.range,
            closing_rate: rel.closing_rate,
            q_y: aux.q.map_or(nan, |q| q.y),
            q_z: aux.q.map_or(nan, |q| q.z),
            q_y_true: q_true.y,
            los_rate,
            e_x_true,
            e_y_true: clean.e_y,
            e_x_est: aux.est.map_or(nan, |e| e.e_x),
            e_y_est: aux.est.map_or(nan, |e| e.e_y),
            de_x_est: aux.est.map_or(nan, |e| e.de_x),
            thrust: aux.cmd.thrust,
            omega_cmd: aux.cmd.omega,
            normal_accel,
            normal_velocity,
            fov_valid: clean.valid,
            l2: 0.5 * (e_x_true * e_x_true + rel.range * rel.range),
            lambda,
            lambda_ok,
            lead_angle,
        }
    }

    /// Physics over one control period. Returns true when the run ends.
    fn integrate(&mut self) -> bool {
        let cmd = self.command.expect("control tick produced a command");
        let dt = self.cfg.physics_dt();
        self.prev_velocity = self.vehicle.velocity;
        for _ in 0..self.cfg.physics_substeps() {
            self.wind.advance(dt, &mut self.wind_rng);
            let wind = self.wind.velocity();
            let scripted = step_target(&self.cfg.target, self.vehicle.t);
            self.drift.step(&scripted.velocity, &wind, &self.wind.model, dt);
            match step_vehicle(
                &self.vehicle,
                &cmd,
                &self.cfg.vehicle,
                &self.gravity,
                &wind,
                self.cfg.wind.vehicle_drag,
                dt,
            ) {
                Ok(next) => self.vehicle = next,
                Err(e) => {
                    log::warn!("run {} diverged: {e}", self.cfg.name);
                    self.outcome = Some(Outcome::Diverged);
                    return true;
                }
            }
            let tgt = self.target_at(self.vehicle.t);
            if relative_state(&self.vehicle, &tgt).range <= self.cfg.capture_radius_m {
                let aux = Aux { q: self.prev_q, est: self.dkf.estimate().ok(), cmd };
                let rec = self.record(self.vehicle.t, &tgt, &aux);
                self.records.push(rec);
                self.outcome = Some(Outcome::Intercepted);
                return true;
            }
        }
        false
    }
}

/// Run one engagement.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    config.validate()?;
    for w in config.warnings() {
        log::warn!("{w}");
    }
    let mut sim = Simulation::new(config);
    sim.execute();
    let outcome = sim.outcome.unwrap_or(Outcome::Timeout);
    let records = std::mem::take(&mut sim.records);
    let frames = std::mem::take(&mut sim.frames);

    let (miss, t_ca) = miss_distance(&records);
    let outcome = if miss <= config.capture_radius_m {
        Outcome::Intercepted
    } else if outcome == Outcome::Intercepted {
        // interpolated miss is never above a sampled range, so this cannot occur
        Outcome::FovLost
    } else {
        outcome
    };
    let terminal_speed = records
        .iter()
        .min_by(|a, b| (a.t - t_ca).abs().total_cmp(&(b.t - t_ca).abs()))
        .map_or(0.0, |r| r.vehicle_velocity.norm());
    let max_rate_cmd = records.iter().map(|r| r.omega_cmd.norm()).fold(0.0, f64::max);
    let report = monitors(&records, &frames, config, t_ca);
    let summary = RunSummary {
        name: config.name.clone(),
        seed: config.seed,
        controller: config.controller,
        outcome,
        miss_distance_m: miss,
        time_of_closest_approach_s: t_ca,
        terminal_speed_mps: terminal_speed,
        max_rate_cmd,
        duration_s: records.last().map_or(0.0, |r| r.t),
        dkf_skipped: sim.dkf.skipped,
        monitors: report,
    };
    Ok(RunOutput { summary, records, frames })
}
