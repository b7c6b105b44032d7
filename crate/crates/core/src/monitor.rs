//! Runtime stability monitors evaluated over a finished run.
//!
//! All checks stop at the blind range or the closest approach, whichever
//! comes first. Past that point the image geometry degenerates and the
//! monitored quantities are no longer meaningful.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::control::fov_excursion_bound;
use crate::guidance::ramp_los_bound;
use crate::mathcore::GRAVITY;
use crate::simloop::StepRecord;

/// Truth at a camera capture instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub t: f64,
    pub valid: bool,
    pub e_y: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MonitorReport {
    /// Start of the monitored window, s.
    pub window_start_s: f64,
    /// End of the monitored window, s.
    pub window_end_s: f64,
    pub l2_samples: u64,
    pub l2_violations: u64,
    pub lambda_samples: u64,
    pub lambda_violations: u64,
    /// Ticks where the navigation constant is below `2|ṙ|/(v cos η)`.
    pub nav_gain_violations: u64,
    /// Increases of the windowed mean |q̇| beyond the tolerance.
    pub los_rate_increases: u64,
    pub los_rate_first_quarter: f64,
    pub los_rate_last_quarter: f64,
    pub fov_frames: u64,
    pub fov_frames_valid: u64,
    /// Largest minus smallest true e_y over the counted frames, px.
    pub delta_e_y_px: f64,
    /// Largest minus smallest true LOS elevation over the window, rad.
    pub delta_q_g_rad: f64,
    pub fov_bound_px: f64,
    pub fov_bound_ok: bool,
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) =
        values.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// End of the monitored engagement: the earlier of the blind-range crossing
/// and the time of closest approach.
pub fn engagement_end(records: &[StepRecord], blind_range: f64, t_closest: f64) -> f64 {
    records.iter().find(|r| r.range <= blind_range).map_or(t_closest, |r| r.t.min(t_closest))
}

pub fn monitors(records: &[StepRecord], frames: &[FrameSample], cfg: &ScenarioConfig, t_closest: f64) -> MonitorReport {
    let m = &cfg.monitors;
    let end = engagement_end(records, m.blind_range_m, t_closest);
    let start = m.transient_s.max(m.transient_fraction * end);
    let active: Vec<&StepRecord> = records.iter().filter(|r| r.t >= start && r.t < end).collect();

    // L₂ at the sampling grid
    let mut l2_samples = 0;
    let mut l2_violations = 0;
    let mut prev: Option<f64> = None;
    for r in &active {
        let phase = r.t * m.l2_sample_hz;
        if (phase - phase.round()).abs() > 1e-6 {
            continue;
        }
        l2_samples += 1;
        if let Some(p) = prev {
            if !(r.l2 <= p + 1e-9 * p.max(1.0)) {
                l2_violations += 1;
            }
        }
        prev = Some(r.l2);
    }

    let lambda_samples = active.len() as u64;
    let lambda_violations = active.iter().filter(|r| !r.lambda_ok).count() as u64;

    let k = cfg.guidance.nav_gain_y.min(cfg.guidance.nav_gain_z);
    let nav_gain_violations = active
        .iter()
        .filter(|r| {
            let speed = r.vehicle_velocity.norm();
            let c = speed * r.lead_angle.cos();
            speed > 1e-3 && !(c > 0.0 && k > 2.0 * r.closing_rate.abs() / c)
        })
        .count() as u64;

    // windowed mean |q̇| over the active window
    let mut window_means = Vec::new();
    let mut w_start = start;
    while w_start + m.los_window_s <= end + 1e-12 {
        let w: Vec<f64> =
            active.iter().filter(|r| r.t >= w_start && r.t < w_start + m.los_window_s).map(|r| r.los_rate).collect();
        if !w.is_empty() {
            window_means.push(mean(&w));
        }
        w_start += m.los_window_s;
    }
    let los_rate_increases = window_means.windows(2).filter(|p| p[1] > p[0] + m.los_rate_tolerance).count() as u64;

    let engaged: Vec<&StepRecord> = records.iter().filter(|r| r.t <= end).collect();
    let quarter = engaged.len() / 4;
    let (first, last) = if quarter > 0 {
        let f: Vec<f64> = engaged[..quarter].iter().map(|r| r.los_rate).collect();
        let l: Vec<f64> = engaged[engaged.len() - quarter..].iter().map(|r| r.los_rate).collect();
        (mean(&f), mean(&l))
    } else {
        (0.0, 0.0)
    };

    let counted: Vec<&FrameSample> = frames.iter().filter(|f| f.t < end).collect();
    let fov_frames = counted.len() as u64;
    let fov_frames_valid = counted.iter().filter(|f| f.valid).count() as u64;
    let delta_e_y = spread(counted.iter().filter(|f| f.valid).map(|f| f.e_y));
    let delta_q_g = spread(engaged.iter().map(|r| r.q_y_true));

    let cam = cfg.camera.intrinsics();
    let dq = ramp_los_bound(cfg.guidance.speed_gain, GRAVITY) + delta_q_g;
    let bound =
        fov_excursion_bound(dq.min(std::f64::consts::FRAC_PI_2 - 1e-9), cam.v0, cam.vfov).unwrap_or(f64::INFINITY);

    MonitorReport {
        window_start_s: start,
        window_end_s: end,
        l2_samples,
        l2_violations,
        lambda_samples,
        lambda_violations,
        nav_gain_violations,
        los_rate_increases,
        los_rate_first_quarter: first,
        los_rate_last_quarter: last,
        fov_frames,
        fov_frames_valid,
        delta_e_y_px: delta_e_y,
        delta_q_g_rad: delta_q_g,
        fov_bound_px: bound,
        fov_bound_ok: delta_e_y <= 1.1 * bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Vec3;

    fn recs(n: usize, dt: f64, f: impl Fn(usize, &mut StepRecord)) -> Vec<StepRecord> {
        (0..n)
            .map(|i| {
                let mut r = StepRecord {
                    t: i as f64 * dt,
                    range: 20.0 - i as f64 * dt,
                    vehicle_velocity: Vec3::new(0.0, 5.0, 0.0),
                    lambda_ok: true,
                    ..Default::default()
                };
                f(i, &mut r);
                r
            })
            .collect()
    }

    #[test]
    fn engagement_end_takes_the_earlier_event() {
        let r = recs(2000, 0.01, |_, _| {});
        // range reaches 2 m at t = 18
        assert!((engagement_end(&r, 2.0, 19.5) - 18.0).abs() < 1e-9);
        assert_eq!(engagement_end(&r, 2.0, 5.0), 5.0);
        assert_eq!(engagement_end(&r, 0.0, 7.25), 7.25);
    }

    #[test]
    fn counts_l2_rises_and_lambda_failures_after_transient() {
        let cfg = ScenarioConfig::default();
        let r = recs(1000, 0.01, |i, r| {
            r.l2 = 100.0 - i as f64 * 0.05;
            // two rises on the 10 Hz grid, one inside the transient
            if i == 50 || i == 300 || i == 600 {
                r.l2 += 10.0;
            }
            r.lambda_ok = !(i == 20 || i == 400 || i == 401);
        });
        let m = monitors(&r, &[], &cfg, 9.99);
        assert_eq!(m.window_start_s, 1.0);
        assert_eq!(m.l2_violations, 2);
        assert_eq!(m.lambda_violations, 2);
        assert_eq!(m.l2_samples, 90);
    }

    #[test]
    fn flat_los_rate_has_no_increases_and_spike_is_counted() {
        let cfg = ScenarioConfig::default();
        let decaying = recs(1000, 0.01, |i, r| r.los_rate = 0.1 * (-(i as f64) * 0.003).exp());
        let m = monitors(&decaying, &[], &cfg, 9.99);
        assert_eq!(m.los_rate_increases, 0);
        assert!(m.los_rate_last_quarter < 0.5 * m.los_rate_first_quarter);

        let spiked = recs(1000, 0.01, |i, r| r.los_rate = if (500..550).contains(&i) { 0.05 } else { 0.001 });
        assert_eq!(monitors(&spiked, &[], &cfg, 9.99).los_rate_increases, 1);
    }

    #[test]
    fn fov_statistics_use_frames_before_the_end() {
        let cfg = ScenarioConfig::default();
        let r = recs(1000, 0.01, |_, _| {});
        let frames: Vec<FrameSample> = (0..300)
            .map(|i| {
                let t = i as f64 / 30.0;
                FrameSample { t, valid: i != 5, e_y: if t < 5.0 { 10.0 + i as f64 * 0.1 } else { 500.0 }, range: 10.0 }
            })
            .collect();
        let m = monitors(&r, &frames, &cfg, 5.0);
        assert_eq!(m.fov_frames, 150);
        assert_eq!(m.fov_frames_valid, 149);
        assert!((m.delta_e_y_px - 14.9).abs() < 1e-9);
        assert!(m.fov_bound_ok);
    }
}
