//! Delayed Kalman filter on the target's pixel track.
//!
//! State is `(u, v, u̇, v̇)` under a constant-velocity model with white
//! acceleration noise. Detections arrive stamped with their capture time,
//! which lags the filter clock by the detector latency. An out-of-sequence
//! detection is absorbed by rewinding to the last snapshot at or before its
//! capture time, applying the update there, and re-predicting every later
//! snapshot up to the current time. The result equals a filter that had seen
//! the detection on time.
//!
//! Pixel motion caused by the camera's own rotation is known from the
//! attitude history and enters the prediction as an additive input, so the
//! velocity states carry only target-induced image motion.

use std::collections::VecDeque;

use nalgebra::{Matrix2x4, Matrix4, Vector2, Vector4};

pub type PixelShift = Vector2<f64>;
use serde::{Deserialize, Serialize};

use crate::error::FilterError;
use crate::sensor::PixelObservation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DkfParams {
    /// White-acceleration spectral density, (px/s²)²·s.
    pub accel_psd: f64,
    /// Measurement variance, px².
    pub meas_var: f64,
    /// Initial position standard deviation, px.
    pub init_pos_std: f64,
    /// Initial velocity standard deviation, px/s.
    pub init_vel_std: f64,
}

impl Default for DkfParams {
    fn default() -> Self {
        Self { accel_psd: 400.0, meas_var: 2.25, init_pos_std: 10.0, init_vel_std: 100.0 }
    }
}

impl DkfParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.accel_psd > 0.0 && self.meas_var > 0.0) {
            return Err("DKF noise parameters must be positive".into());
        }
        if !(self.init_pos_std > 0.0 && self.init_vel_std > 0.0) {
            return Err("DKF initial deviations must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    /// Ego-motion shift applied between the previous snapshot and this one.
    pub input: PixelShift,
}

/// Current-time pixel error and its rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelEstimate {
    pub e_x: f64,
    pub e_y: f64,
    pub de_x: f64,
    pub de_y: f64,
}

#[derive(Debug, Clone)]
pub struct Dkf {
    params: DkfParams,
    u0: f64,
    v0: f64,
    /// Filter clock.
    pub t_est: f64,
    x: Vector4<f64>,
    p: Matrix4<f64>,
    history: VecDeque<Snapshot>,
    history_span: f64,
    initialized: bool,
    /// Updates dropped because they predate the retained history.
    pub skipped: u64,
    /// Updates dropped because their capture time is after the filter clock.
    pub rejected_future: u64,
    pub applied: u64,
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_noise(q: f64, dt: f64) -> Matrix4<f64> {
    let (d2, d3) = (dt * dt / 2.0, dt * dt * dt / 3.0);
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        m[(i, i)] = d3 * q;
        m[(i, i + 2)] = d2 * q;
        m[(i + 2, i)] = d2 * q;
        m[(i + 2, i + 2)] = dt * q;
    }
    m
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

/// Constant-velocity prediction of `(x, P)` over `dt`.
pub fn predict_state(x: &Vector4<f64>, p: &Matrix4<f64>, q: f64, dt: f64) -> (Vector4<f64>, Matrix4<f64>) {
    if dt == 0.0 {
        return (*x, *p);
    }
    let f = transition(dt);
    let p = f * p * f.transpose() + process_noise(q, dt);
    (f * x, 0.5 * (p + p.transpose()))
}

fn apply_input(x: &Vector4<f64>, shift: &PixelShift) -> Vector4<f64> {
    Vector4::new(x[0] + shift.x, x[1] + shift.y, x[2], x[3])
}

/// Position measurement update in Joseph form.
pub fn update_state(x: &Vector4<f64>, p: &Matrix4<f64>, r: f64, u: f64, v: f64) -> (Vector4<f64>, Matrix4<f64>) {
    let h = observation();
    let s = h * p * h.transpose() + nalgebra::Matrix2::identity() * r;
    // S is SPD for r > 0, so the inverse exists
    let s_inv = s.try_inverse().expect("innovation covariance is invertible");
    let k = p * h.transpose() * s_inv;
    let innovation = Vector2::new(u, v) - h * x;
    let x = x + k * innovation;
    let i_kh = Matrix4::identity() - k * h;
    let p = i_kh * p * i_kh.transpose() + k * (r * k.transpose());
    (x, 0.5 * (p + p.transpose()))
}

impl Dkf {
    /// `history_span` is how far back (s) delayed updates can reach; use at
    /// least twice the detector latency.
    pub fn new(params: DkfParams, principal_point: (f64, f64), history_span: f64) -> Self {
        Self {
            params,
            u0: principal_point.0,
            v0: principal_point.1,
            t_est: 0.0,
            x: Vector4::zeros(),
            p: Matrix4::zeros(),
            history: VecDeque::new(),
            history_span,
            initialized: false,
            skipped: 0,
            rejected_future: 0,
            applied: 0,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn state(&self) -> (&Vector4<f64>, &Matrix4<f64>) {
        (&self.x, &self.p)
    }

    pub fn history(&self) -> impl Iterator<Item = &Snapshot> {
        self.history.iter()
    }

    /// Advance the filter clock by `dt`, recording a snapshot.
    pub fn predict(&mut self, dt: f64) {
        self.predict_with_input(dt, &PixelShift::zeros());
    }

    /// Advance by `dt` and add the known pixel displacement `shift` caused by
    /// camera rotation over the interval.
    pub fn predict_with_input(&mut self, dt: f64, shift: &PixelShift) {
        assert!(dt > 0.0, "predict requires dt > 0");
        self.t_est += dt;
        if !self.initialized {
            return;
        }
        let (x, p) = predict_state(&self.x, &self.p, self.params.accel_psd, dt);
        self.x = apply_input(&x, shift);
        self.p = p;
        self.push_snapshot(*shift);
    }

    /// Apply a (possibly delayed) detection. Invalid detections are ignored.
    pub fn update_delayed(&mut self, z: &PixelObservation) {
        if !z.valid {
            return;
        }
        const EPS: f64 = 1e-9;
        if z.t_capture > self.t_est + EPS {
            self.rejected_future += 1;
            return;
        }
        if !self.initialized {
            self.initialize(z);
            return;
        }
        let Some(idx) = self.history.iter().rposition(|s| s.t <= z.t_capture + EPS) else {
            self.skipped += 1;
            log::debug!("DKF: detection at t={} predates history", z.t_capture);
            return;
        };

        let base = self.history[idx];
        let lead = (z.t_capture - base.t).max(0.0);
        // the interval's ego-motion input is split in proportion to time
        let (head, tail) = match self.history.get(idx + 1) {
            Some(after) if lead > EPS => {
                let frac = lead / (after.t - base.t);
                (after.input * frac, after.input * (1.0 - frac))
            }
            Some(after) => (PixelShift::zeros(), after.input),
            None => (PixelShift::zeros(), PixelShift::zeros()),
        };
        let (x, p) = predict_state(&base.x, &base.p, self.params.accel_psd, lead);
        let (x, p) = update_state(&apply_input(&x, &head), &p, self.params.meas_var, z.u, z.v);
        let mut next = if lead <= EPS {
            self.history[idx] = Snapshot { x, p, ..base };
            idx + 1
        } else {
            self.history.insert(idx + 1, Snapshot { t: z.t_capture, x, p, input: head });
            if let Some(after) = self.history.get_mut(idx + 2) {
                after.input = tail;
            }
            idx + 2
        };
        while next < self.history.len() {
            let prev = self.history[next - 1];
            let Snapshot { t, input, .. } = self.history[next];
            let (x, p) = predict_state(&prev.x, &prev.p, self.params.accel_psd, t - prev.t);
            self.history[next] = Snapshot { t, x: apply_input(&x, &input), p, input };
            next += 1;
        }
        let last = self.history.back().copied().expect("history is non-empty");
        self.x = last.x;
        self.p = last.p;
        self.applied += 1;
    }

    fn initialize(&mut self, z: &PixelObservation) {
        let (ps, vs) = (self.params.init_pos_std, self.params.init_vel_std);
        self.x = Vector4::new(z.u, z.v, 0.0, 0.0);
        self.p = Matrix4::from_diagonal(&Vector4::new(ps * ps, ps * ps, vs * vs, vs * vs));
        self.initialized = true;
        self.applied += 1;
        self.history.clear();
        let zero = PixelShift::zeros();
        self.history.push_back(Snapshot { t: z.t_capture, x: self.x, p: self.p, input: zero });
        let dt = self.t_est - z.t_capture;
        if dt > 1e-9 {
            let (x, p) = predict_state(&self.x, &self.p, self.params.accel_psd, dt);
            self.x = x;
            self.p = p;
            self.history.push_back(Snapshot { t: self.t_est, x, p, input: zero });
        }
    }

    fn push_snapshot(&mut self, input: PixelShift) {
        self.history.push_back(Snapshot { t: self.t_est, x: self.x, p: self.p, input });
        let cutoff = self.t_est - self.history_span;
        // keep one snapshot at or before the cutoff so updates at the edge still land
        while self.history.len() > 1 && self.history[1].t <= cutoff {
            self.history.pop_front();
        }
    }

    pub fn estimate(&self) -> Result<PixelEstimate, FilterError> {
        if !self.initialized {
            return Err(FilterError::Uninitialized);
        }
        Ok(PixelEstimate { e_x: self.x[0] - self.u0, e_y: self.x[1] - self.v0, de_x: self.x[2], de_y: self.x[3] })
    }
}

/// `dkf_predict`.
pub fn dkf_predict(state: &mut Dkf, dt: f64) {
    state.predict(dt)
}

/// `dkf_update_delayed`.
pub fn dkf_update_delayed(state: &mut Dkf, z: &PixelObservation) {
    state.update_delayed(z)
}

/// `dkf_estimate`.
pub fn dkf_estimate(state: &Dkf) -> Result<PixelEstimate, FilterError> {
    state.estimate()
}
