use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use intercept_core::control::{attitude_rate, tilt_rotation};
use intercept_core::mathcore::{exp_so3, rodrigues};
use intercept_core::sensor::{los_from_pixels, project};
use intercept_core::{
    run, CameraIntrinsics, Dkf, DkfParams, LatencyQueue, PixelObservation, ScenarioConfig, Vec3, VehicleState,
};

fn engagement(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    c.bench_function("run/static_default", |b| b.iter(|| run(black_box(&cfg)).unwrap()));
}

fn dkf(c: &mut Criterion) {
    let cam = CameraIntrinsics::default();
    c.bench_function("dkf/4s_delayed_track", |b| {
        b.iter(|| {
            let mut f = Dkf::new(DkfParams::default(), (cam.u0, cam.v0), 0.3);
            let mut q = LatencyQueue::new(30.0, 0.1);
            for k in 0..400 {
                let t = k as f64 * 0.01;
                let tick = q.tick(t, |tc| PixelObservation {
                    u: 300.0 + 20.0 * tc,
                    v: 250.0 - 5.0 * tc,
                    t_capture: tc,
                    valid: true,
                    e_x: 0.0,
                    e_y: 0.0,
                });
                if k > 0 {
                    f.predict(0.01);
                }
                if let Some(z) = tick.delivered {
                    f.update_delayed(&z);
                }
            }
            black_box(f.estimate().unwrap())
        })
    });
}

fn geometry(c: &mut Criterion) {
    let cam = CameraIntrinsics::default();
    let axis = Vec3::new(0.3, -0.5, 0.8).normalize();
    c.bench_function("mathcore/rodrigues", |b| b.iter(|| rodrigues(black_box(&axis), black_box(0.7)).unwrap()));

    let r = exp_so3(&Vec3::new(0.1, 0.2, 0.3));
    let r_d = exp_so3(&Vec3::new(-0.2, 0.1, 0.5));
    c.bench_function("control/tilt_and_rate", |b| {
        b.iter(|| {
            let n_f = r.column(2).into_owned();
            let tilt = tilt_rotation(&n_f, black_box(&Vec3::new(0.1, 0.2, 0.97).normalize()));
            attitude_rate(&(tilt * r), black_box(&r_d))
        })
    });

    let veh = VehicleState::at_rest(Vec3::new(0.0, 0.0, 10.0), r);
    let target = Vec3::new(2.0, 20.0, 12.0);
    c.bench_function("sensor/project_and_back", |b| {
        b.iter(|| {
            let obs = project(black_box(&target), &veh, &cam);
            los_from_pixels(obs.e_x, obs.e_y, cam.focal, &veh.r_be, &cam.r_cb)
        })
    });
}

criterion_group!(benches, engagement, dkf, geometry);
criterion_main!(benches);
