//! Synthetic strapdown camera: pinhole projection, pixel noise, frame timing
//! with processing latency, and LOS reconstruction from pixel errors.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::mathcore::{camera_down_mount, camera_forward_mount, RotMatrix, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CameraMount {
    #[default]
    Forward,
    Down,
}

impl CameraMount {
    pub fn rotation(self) -> RotMatrix {
        match self {
            CameraMount::Forward => camera_forward_mount(),
            CameraMount::Down => camera_down_mount(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    /// Focal length, px.
    pub focal: f64,
    pub u0: f64,
    pub v0: f64,
    pub width: f64,
    pub height: f64,
    /// Vertical field of view, rad.
    pub vfov: f64,
    /// Camera-to-body rotation.
    pub r_cb: RotMatrix,
}

impl CameraIntrinsics {
    /// Centered principal point, focal length from the horizontal FOV.
    pub fn from_hfov(width: f64, height: f64, hfov: f64, mount: CameraMount) -> Self {
        let focal = 0.5 * width / (0.5 * hfov).tan();
        Self::from_focal(width, height, focal, mount)
    }

    pub fn from_focal(width: f64, height: f64, focal: f64, mount: CameraMount) -> Self {
        Self {
            focal,
            u0: 0.5 * width,
            v0: 0.5 * height,
            width,
            height,
            vfov: 2.0 * (0.5 * height / focal).atan(),
            r_cb: mount.rotation(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.focal > 0.0) {
            return Err("focal length must be positive".into());
        }
        if !(self.vfov > 0.0 && self.vfov < std::f64::consts::PI) {
            return Err("vertical FOV must lie in (0, π)".into());
        }
        if !(self.u0 >= 0.0 && self.u0 < self.width && self.v0 >= 0.0 && self.v0 < self.height) {
            return Err("principal point must lie inside the image".into());
        }
        let implied = (0.5 * self.height) / (0.5 * self.vfov).tan();
        if (implied - self.focal).abs() > 0.01 * self.focal {
            return Err("vertical FOV inconsistent with focal length and image height".into());
        }
        Ok(())
    }

    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width && v >= 0.0 && v < self.height
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::from_hfov(640.0, 480.0, 120f64.to_radians(), CameraMount::Forward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelObservation {
    pub u: f64,
    pub v: f64,
    pub t_capture: f64,
    pub valid: bool,
    pub e_x: f64,
    pub e_y: f64,
}

impl PixelObservation {
    fn at(u: f64, v: f64, t: f64, cam: &CameraIntrinsics) -> Self {
        Self { u, v, t_capture: t, valid: cam.in_bounds(u, v), e_x: u - cam.u0, e_y: v - cam.v0 }
    }

    fn behind(t: f64) -> Self {
        Self { u: f64::NAN, v: f64::NAN, t_capture: t, valid: false, e_x: f64::NAN, e_y: f64::NAN }
    }
}

/// Target position in the camera frame.
pub fn camera_frame(p_target: &Vec3, vehicle: &VehicleState, cam: &CameraIntrinsics) -> Vec3 {
    cam.r_cb.transpose() * (vehicle.r_be.transpose() * (p_target - vehicle.position))
}

/// Pinhole projection. Points behind the camera or outside the image come
/// back with `valid == false`.
pub fn project(p_target: &Vec3, vehicle: &VehicleState, cam: &CameraIntrinsics) -> PixelObservation {
    project_camera_point(&camera_frame(p_target, vehicle, cam), vehicle.t, cam)
}

pub fn project_camera_point(p_c: &Vec3, t: f64, cam: &CameraIntrinsics) -> PixelObservation {
    if p_c.z <= 0.0 {
        return PixelObservation::behind(t);
    }
    let u = cam.u0 + cam.focal * p_c.x / p_c.z;
    let v = cam.v0 + cam.focal * p_c.y / p_c.z;
    PixelObservation::at(u, v, t, cam)
}

/// Adds i.i.d. Gaussian jitter to a valid detection and re-checks bounds.
pub fn add_pixel_noise<R: Rng + ?Sized>(
    obs: &PixelObservation,
    sigma_px: f64,
    cam: &CameraIntrinsics,
    rng: &mut R,
) -> PixelObservation {
    if !obs.valid || sigma_px == 0.0 {
        return *obs;
    }
    let du: f64 = rng.sample(StandardNormal);
    let dv: f64 = rng.sample(StandardNormal);
    PixelObservation::at(obs.u + sigma_px * du, obs.v + sigma_px * dv, obs.t_capture, cam)
}

/// Earth-frame unit LOS from a pixel error: `R_be R_cb [e_x, e_y, f]ᵀ / ‖·‖`.
pub fn los_from_pixels(e_x: f64, e_y: f64, focal: f64, r_be: &RotMatrix, r_cb: &RotMatrix) -> Vec3 {
    let ray = Vec3::new(e_x, e_y, focal);
    (r_be * (r_cb * ray)).normalize()
}

/// Pixel displacement of a fixed earth direction seen at `(u, v)` when the
/// body attitude changes from `r_old` to `r_new`. `None` when the direction
/// ends up behind the camera.
pub fn rotation_pixel_shift(
    u: f64,
    v: f64,
    r_old: &RotMatrix,
    r_new: &RotMatrix,
    cam: &CameraIntrinsics,
) -> Option<(f64, f64)> {
    let ray = Vec3::new(u - cam.u0, v - cam.v0, cam.focal);
    let p_c = cam.r_cb.transpose() * (r_new.transpose() * (r_old * (cam.r_cb * ray)));
    if p_c.z <= 0.0 {
        return None;
    }
    Some((cam.u0 + cam.focal * p_c.x / p_c.z - u, cam.v0 + cam.focal * p_c.y / p_c.z - v))
}

/// Image velocity (px/s) of a static point at pixel error `(e_x, e_y)`
/// induced by the body rate `omega_body` alone.
pub fn rotational_image_rate(e_x: f64, e_y: f64, focal: f64, omega_body: &Vec3, r_cb: &RotMatrix) -> (f64, f64) {
    let w = r_cb.transpose() * omega_body;
    let (x, y) = (e_x / focal, e_y / focal);
    (focal * (x * y * w.x - (1.0 + x * x) * w.y + y * w.z), focal * ((1.0 + y * y) * w.x - x * y * w.y - x * w.z))
}

/// Frame scheduling and detection latency.
#[derive(Debug, Clone)]
pub struct LatencyQueue {
    pub frame_interval: f64,
    pub latency: f64,
    next_capture: f64,
    pending: VecDeque<PixelObservation>,
    captured: u64,
    delivered: u64,
}

const TICK_EPS: f64 = 1e-9;

impl LatencyQueue {
    pub fn new(rate_hz: f64, latency: f64) -> Self {
        assert!(rate_hz > 0.0 && latency >= 0.0);
        Self {
            frame_interval: 1.0 / rate_hz,
            latency,
            next_capture: 0.0,
            pending: VecDeque::new(),
            captured: 0,
            delivered: 0,
        }
    }

    pub fn captured(&self) -> u64 {
        self.captured
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Capture a frame if one is due at `t` (sampled with `truth(t)`), then
    /// release at most one observation whose latency has elapsed.
    ///
    /// Returns the delivered observation, plus the freshly captured frame if
    /// one was taken on this tick.
    pub fn tick<F>(&mut self, t: f64, mut truth: F) -> Tick
    where
        F: FnMut(f64) -> PixelObservation,
    {
        let mut captured = None;
        if t + TICK_EPS >= self.next_capture {
            let obs = truth(t);
            self.pending.push_back(obs);
            self.captured += 1;
            captured = Some(obs);
            // skip whole missed frames so capture stays on the f_img grid
            while self.next_capture <= t + TICK_EPS {
                self.next_capture += self.frame_interval;
            }
        }
        let delivered = match self.pending.front() {
            Some(front) if front.t_capture + self.latency <= t + TICK_EPS => {
                self.delivered += 1;
                self.pending.pop_front()
            }
            _ => None,
        };
        Tick { captured, delivered }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Tick {
    pub captured: Option<PixelObservation>,
    pub delivered: Option<PixelObservation>,
}

/// `camera_tick`: the delivery half of [`LatencyQueue::tick`].
pub fn camera_tick<F>(queue: &mut LatencyQueue, t: f64, truth: F) -> Option<PixelObservation>
where
    F: FnMut(f64) -> PixelObservation,
{
    queue.tick(t, truth).delivered
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::{rodrigues, yaw_rotation, Mat3};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cam400() -> CameraIntrinsics {
        CameraIntrinsics::from_focal(640.0, 480.0, 400.0, CameraMount::Forward)
    }

    #[test]
    fn rotational_rate_matches_reprojection() {
        use rand::Rng;
        let cam = cam400();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r0 = yaw_rotation(rng.random_range(-3.0..3.0));
            let w = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let (u, v) = (rng.random_range(100.0..540.0), rng.random_range(80.0..400.0));
            let dt = 1e-6;
            let r1 = r0 * crate::mathcore::exp_so3(&(w * dt));
            let (du, dv) = rotation_pixel_shift(u, v, &r0, &r1, &cam).unwrap();
            let (ru, rv) = rotational_image_rate(u - cam.u0, v - cam.v0, cam.focal, &w, &cam.r_cb);
            assert_relative_eq!(du / dt, ru, epsilon = 1e-3 * (1.0 + ru.abs()));
            assert_relative_eq!(dv / dt, rv, epsilon = 1e-3 * (1.0 + rv.abs()));
        }
        // pure yaw to the right pulls a right-of-centre target toward the centre
        let (ru, _) = rotational_image_rate(50.0, 0.0, cam.focal, &Vec3::new(0.0, 0.0, -1.0), &cam.r_cb);
        assert!(ru < 0.0);
    }

    #[test]
    fn default_camera_is_consistent() {
        let cam = CameraIntrinsics::default();
        cam.validate().unwrap();
        assert_relative_eq!(cam.focal, 320.0 / 3f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn axis_target_hits_principal_point() {
        let cam = cam400();
        let veh = VehicleState::at_rest(Vec3::new(1.0, 2.0, 3.0), Mat3::identity());
        let obs = project(&Vec3::new(1.0, 9.0, 3.0), &veh, &cam);
        assert!(obs.valid);
        assert_eq!((obs.u, obs.v, obs.e_x, obs.e_y), (320.0, 240.0, 0.0, 0.0));
    }

    #[test]
    fn behind_camera_is_invalid() {
        let cam = cam400();
        let veh = VehicleState::at_rest(Vec3::zeros(), Mat3::identity());
        assert!(!project(&Vec3::new(0.0, -5.0, 0.0), &veh, &cam).valid);
    }

    #[test]
    fn pinhole_arithmetic() {
        let cam = cam400();
        let obs = project_camera_point(&Vec3::new(1.0, 0.0, 2.0), 0.0, &cam);
        // 320 + 400 * 1/2
        assert_eq!((obs.u, obs.v), (520.0, 240.0));
    }

    #[test]
    fn noise_free_is_identity_and_spread_matches() {
        let cam = cam400();
        let obs = project_camera_point(&Vec3::new(0.1, 0.1, 5.0), 0.0, &cam);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(add_pixel_noise(&obs, 0.0, &cam, &mut rng), obs);

        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|_| add_pixel_noise(&obs, 2.0, &cam, &mut rng).u).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        assert!((1.9..=2.1).contains(&std), "std {std}");
    }

    #[test]
    fn noise_can_push_out_of_frame() {
        let cam = cam400();
        let obs = PixelObservation::at(0.2, 240.0, 0.0, &cam);
        assert!(obs.valid);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pushed = (0..100).map(|_| add_pixel_noise(&obs, 5.0, &cam, &mut rng)).find(|o| o.u < 0.0).unwrap();
        assert!(!pushed.valid);
    }

    #[test]
    fn los_examples() {
        let r_cb = camera_forward_mount();
        let n = los_from_pixels(0.0, 0.0, 400.0, &Mat3::identity(), &r_cb);
        assert_relative_eq!(n, Vec3::y(), epsilon = 1e-15);

        // tan 45° = 1 in the camera x–z plane; camera x is body x
        let n = los_from_pixels(400.0, 0.0, 400.0, &Mat3::identity(), &r_cb);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(n, Vec3::new(h, h, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn projection_round_trip_recovers_los() {
        let cam = CameraIntrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 1000 {
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize();
            let r = yaw_rotation(rng.random_range(-3.0..3.0)) * rodrigues(&axis, rng.random_range(-0.5..0.5)).unwrap();
            let veh = VehicleState::at_rest(Vec3::new(0.0, 0.0, 10.0), r);
            let target = veh.position
                + Vec3::new(
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-10.0..10.0),
                );
            let obs = project(&target, &veh, &cam);
            if !obs.valid {
                continue;
            }
            let n = los_from_pixels(obs.e_x, obs.e_y, cam.focal, &veh.r_be, &cam.r_cb);
            let truth = (target - veh.position).normalize();
            let angle = n.cross(&truth).norm().atan2(n.dot(&truth));
            assert!(angle <= 1e-6, "angle {angle}");
            assert!((n.norm() - 1.0).abs() <= 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn validity_matches_bounds() {
        let cam = CameraIntrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let p = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let obs = project_camera_point(&p, 0.0, &cam);
            let expected = p.z > 0.0 && {
                let u = cam.u0 + cam.focal * p.x / p.z;
                let v = cam.v0 + cam.focal * p.y / p.z;
                (0.0..cam.width).contains(&u) && (0.0..cam.height).contains(&v)
            };
            assert_eq!(obs.valid, expected);
        }
    }

    fn obs_at(t: f64) -> PixelObservation {
        PixelObservation { u: t, v: 0.0, t_capture: t, valid: true, e_x: 0.0, e_y: 0.0 }
    }

    #[test]
    fn zero_latency_same_rate_delivers_every_tick() {
        let mut q = LatencyQueue::new(100.0, 0.0);
        for k in 0..100 {
            let t = k as f64 * 0.01;
            let got = camera_tick(&mut q, t, obs_at).unwrap();
            assert_eq!(got.t_capture, t);
        }
    }

    #[test]
    fn latency_delays_first_frame() {
        let mut q = LatencyQueue::new(30.0, 0.1);
        let mut first = None;
        for k in 0..30 {
            let t = k as f64 * 0.01;
            if let Some(o) = camera_tick(&mut q, t, obs_at) {
                first = Some((t, o));
                break;
            }
        }
        let (t, o) = first.unwrap();
        assert_eq!(o.t_capture, 0.0);
        assert!((t - 0.1).abs() < 1e-9);
    }

    #[test]
    fn steady_state_rate_and_ordering() {
        let mut q = LatencyQueue::new(30.0, 0.1);
        let mut last = -1.0;
        let mut in_window = 0;
        for k in 0..1000 {
            let t = k as f64 * 0.01;
            if let Some(o) = camera_tick(&mut q, t, obs_at) {
                assert!(o.t_capture > last, "reordered");
                assert!(o.t_capture + 0.1 <= t + 1e-9, "future frame");
                last = o.t_capture;
                if (2.0..3.0).contains(&t) {
                    in_window += 1;
                }
            }
        }
        assert_eq!(in_window, 30);
        // nothing dropped: everything captured is delivered or still queued
        assert_eq!(q.captured(), q.delivered() + q.pending() as u64);
    }
}
