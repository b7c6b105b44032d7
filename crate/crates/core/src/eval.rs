//! Monte Carlo harness, miss/image-error statistics and controller comparison.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Controller, SamplerConfig, ScenarioConfig};
use crate::dynamics::{Maneuver, MotionModel};
use crate::error::{ConfigError, EvalError};
use crate::mathcore::{yaw_towards, Vec3};
use crate::simloop::{mix_seed, run, sig9, sorted_json, Outcome, RunOutput, RunSummary, StepRecord};

/// The `⌈p·n⌉`-th smallest value (nearest rank, no interpolation).
pub fn quantile_nearest_rank(values: &[f64], p: f64) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p.clamp(0.0, 1.0) * v.len() as f64).ceil() as usize).max(1);
    Ok(v[rank - 1])
}

/// Circular error probable: the nearest-rank median miss distance.
pub fn cep(miss: &[f64]) -> Result<f64, EvalError> {
    quantile_nearest_rank(miss, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ImageErrorStats {
    pub median_x: f64,
    pub median_y: f64,
    pub iqr_x: f64,
    pub iqr_y: f64,
    pub samples: u64,
}

/// Median and interquartile range of the image error per axis, normalized by
/// the half image extent. Only rows with the target in view and inside the
/// monitored window (`t ≤ t_end`) contribute.
pub fn image_error_stats<'a>(
    runs: impl IntoIterator<Item = (&'a [StepRecord], f64)>,
    half_width: f64,
    half_height: f64,
) -> Result<ImageErrorStats, EvalError> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (records, t_end) in runs {
        for r in records.iter().filter(|r| r.fov_valid && r.t <= t_end) {
            xs.push(r.e_x_true / half_width);
            ys.push(r.e_y_true / half_height);
        }
    }
    let q = |v: &[f64], p| quantile_nearest_rank(v, p);
    Ok(ImageErrorStats {
        median_x: q(&xs, 0.5)?,
        median_y: q(&ys, 0.5)?,
        iqr_x: q(&xs, 0.75)? - q(&xs, 0.25)?,
        iqr_y: q(&ys, 0.75)? - q(&ys, 0.25)?,
        samples: xs.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpec {
    pub base: ScenarioConfig,
    pub runs: usize,
    pub sampler: SamplerConfig,
    pub controller: Controller,
    pub seed: u64,
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be ≥ 1".into()));
        }
        self.sampler.validate()?;
        self.base.validate()
    }

    /// Configuration of run `index`: static target drawn from the sampler,
    /// heading pointed at it with a uniform error.
    pub fn run_config(&self, index: usize) -> ScenarioConfig {
        let seed = mix_seed(self.seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = &self.sampler;
        let uniform = |rng: &mut ChaCha8Rng, r: [f64; 2]| if r[1] > r[0] { rng.random_range(r[0]..r[1]) } else { r[0] };
        let range = uniform(&mut rng, s.range_m);
        let azimuth = uniform(&mut rng, s.azimuth_deg).to_radians();
        let dz = uniform(&mut rng, s.altitude_offset_m).clamp(-range, range);
        let heading_error = uniform(&mut rng, [-s.heading_error_deg, s.heading_error_deg]);

        let p0 = Vec3::from(self.base.initial.position);
        let horizontal = (range * range - dz * dz).sqrt();
        let mut target = p0 + Vec3::new(horizontal * azimuth.sin(), horizontal * azimuth.cos(), dz);
        target.z = target.z.max(s.min_altitude_m);

        let mut cfg = self.base.clone();
        cfg.name = format!("static-{index:03}");
        cfg.seed = seed;
        cfg.controller = self.controller;
        cfg.target = MotionModel::new(target, Maneuver::Static);
        cfg.initial.yaw_deg = Some(yaw_towards(&(target - p0)).to_degrees() + heading_error);
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ViolationTotals {
    pub l2: u64,
    pub lambda: u64,
    pub nav_gain: u64,
    pub los_rate: u64,
    pub fov_invalid_frames: u64,
    pub fov_bound: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub controller: Controller,
    pub seed: u64,
    pub runs: usize,
    pub capture_radius_m: f64,
    pub cep_m: f64,
    pub mean_miss_m: f64,
    pub median_miss_m: f64,
    pub max_miss_m: f64,
    /// Fraction of runs with miss ≤ capture radius.
    pub success_rate: f64,
    pub diverged: usize,
    pub image_error: ImageErrorStats,
    pub violations: ViolationTotals,
    pub summaries: Vec<RunSummary>,
}

impl MonteCarloReport {
    pub fn to_json(&self) -> String {
        sorted_json(self)
    }

    pub fn misses(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.miss_distance_m).collect()
    }
}

/// Execute every run of the suite on a pool of `jobs` threads. Output order
/// follows the run index regardless of scheduling.
pub fn montecarlo_runs(spec: &MonteCarloSpec, jobs: usize) -> Result<Vec<RunOutput>, EvalError> {
    spec.validate()?;
    let configs: Vec<ScenarioConfig> = (0..spec.runs).map(|i| spec.run_config(i)).collect();
    run_all(&configs, jobs)
}

/// Run a batch of scenarios in parallel, preserving input order.
pub fn run_all(configs: &[ScenarioConfig], jobs: usize) -> Result<Vec<RunOutput>, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::Config(ConfigError::Invalid(format!("thread pool: {e}"))))?;
    let results: Vec<Result<RunOutput, ConfigError>> = pool.install(|| configs.par_iter().map(run).collect());
    results.into_iter().map(|r| r.map_err(EvalError::from)).collect()
}

/// Aggregate per-run outputs into a report.
pub fn build_report(spec: &MonteCarloSpec, outputs: &[RunOutput]) -> Result<MonteCarloReport, EvalError> {
    let summaries: Vec<RunSummary> = outputs.iter().map(|o| o.summary.clone()).collect();
    let misses: Vec<f64> = summaries.iter().map(|s| s.miss_distance_m).collect();
    let radius = spec.base.capture_radius_m;
    let successes = misses.iter().filter(|m| **m <= radius).count();
    let cam = spec.base.camera.intrinsics();
    let image_error = image_error_stats(
        outputs.iter().map(|o| (o.records.as_slice(), o.summary.monitors.window_end_s)),
        0.5 * cam.width,
        0.5 * cam.height,
    )
    .unwrap_or_default();
    let mut v = ViolationTotals::default();
    for s in &summaries {
        let m = &s.monitors;
        v.l2 += m.l2_violations;
        v.lambda += m.lambda_violations;
        v.nav_gain += m.nav_gain_violations;
        v.los_rate += m.los_rate_increases;
        v.fov_invalid_frames += m.fov_frames - m.fov_frames_valid;
        v.fov_bound += u64::from(!m.fov_bound_ok);
    }
    Ok(MonteCarloReport {
        controller: spec.controller,
        seed: spec.seed,
        runs: summaries.len(),
        capture_radius_m: radius,
        cep_m: cep(&misses)?,
        mean_miss_m: misses.iter().sum::<f64>() / misses.len() as f64,
        median_miss_m: quantile_nearest_rank(&misses, 0.5)?,
        max_miss_m: misses.iter().copied().fold(0.0, f64::max),
        success_rate: successes as f64 / misses.len() as f64,
        diverged: summaries.iter().filter(|s| s.outcome == Outcome::Diverged).count(),
        image_error,
        violations: v,
        summaries,
    })
}

pub fn montecarlo(spec: &MonteCarloSpec, jobs: usize) -> Result<MonteCarloReport, EvalError> {
    let outputs = montecarlo_runs(spec, jobs)?;
    build_report(spec, &outputs)
}

/// Moving-target engagement models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovingScenario {
    /// Constant velocity, climbing.
    Cv,
    /// Constant acceleration.
    Ca,
    /// Sinusoidal weave with forward drift.
    Sm,
}

impl MovingScenario {
    pub const ALL: [MovingScenario; 3] = [MovingScenario::Cv, MovingScenario::Ca, MovingScenario::Sm];

    pub fn name(self) -> &'static str {
        match self {
            MovingScenario::Cv => "cv",
            MovingScenario::Ca => "ca",
            MovingScenario::Sm => "sm",
        }
    }

    pub fn motion(self) -> MotionModel {
        match self {
            MovingScenario::Cv => {
                MotionModel::new(Vec3::new(0.0, 25.0, 1.0), Maneuver::ConstantVelocity { velocity: [0.0, 0.0, 1.0] })
            }
            MovingScenario::Ca => MotionModel::new(
                Vec3::new(-8.0, 15.0, 8.0),
                Maneuver::ConstantAcceleration { acceleration: [0.8, 0.0, 0.2] },
            ),
            MovingScenario::Sm => MotionModel::new(
                Vec3::new(0.0, 30.0, 10.0),
                Maneuver::Sinusoidal { amplitude: 2.0, period: 14.0, drift: 3.0 },
            ),
        }
    }

    /// `base` with this target model and the given controller.
    pub fn config(self, base: &ScenarioConfig, controller: Controller) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.name = self.name().to_string();
        cfg.controller = controller;
        cfg.target = self.motion();
        cfg.initial.yaw_deg = None;
        cfg
    }
}

impl std::str::FromStr for MovingScenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cv" => Ok(MovingScenario::Cv),
            "ca" => Ok(MovingScenario::Ca),
            "sm" => Ok(MovingScenario::Sm),
            other => Err(format!("unknown scenario {other:?} (expected cv|ca|sm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub scenario: String,
    pub seed: u64,
    pub proposed_miss_m: f64,
    pub pg_miss_m: f64,
    /// proposed / pg.
    pub ratio: f64,
    /// Proposed miss strictly below the baseline.
    pub ordering_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
    pub ordering_violations: usize,
}

impl CompareTable {
    pub fn to_json(&self) -> String {
        sorted_json(self)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario", "seed", "proposed_miss_m", "pg_miss_m", "ratio", "ordering_ok"])?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.seed.to_string(),
                sig9(r.proposed_miss_m),
                sig9(r.pg_miss_m),
                sig9(r.ratio),
                r.ordering_ok.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pair summaries by position; names and seeds must agree.
pub fn compare_table(proposed: &[RunSummary], pg: &[RunSummary]) -> Result<CompareTable, EvalError> {
    if proposed.is_empty() || proposed.len() != pg.len() {
        return Err(EvalError::Empty);
    }
    let mut rows = Vec::with_capacity(proposed.len());
    for (a, b) in proposed.iter().zip(pg) {
        if a.seed != b.seed || a.name != b.name {
            return Err(EvalError::SeedMismatch { scenario: a.name.clone(), left: a.seed, right: b.seed });
        }
        let ratio = if b.miss_distance_m > 0.0 {
            a.miss_distance_m / b.miss_distance_m
        } else if a.miss_distance_m == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        rows.push(CompareRow {
            scenario: a.name.clone(),
            seed: a.seed,
            proposed_miss_m: a.miss_distance_m,
            pg_miss_m: b.miss_distance_m,
            ratio,
            ordering_ok: a.miss_distance_m < b.miss_distance_m,
        });
    }
    let ordering_violations = rows.iter().filter(|r| !r.ordering_ok).count();
    Ok(CompareTable { rows, ordering_violations })
}

/// Run each moving scenario with both controllers on the same seed.
pub fn compare(
    base: &ScenarioConfig,
    scenarios: &[MovingScenario],
    jobs: usize,
) -> Result<(CompareTable, Vec<RunOutput>, Vec<RunOutput>), EvalError> {
    let proposed: Vec<ScenarioConfig> = scenarios.iter().map(|s| s.config(base, Controller::Proposed)).collect();
    let pg: Vec<ScenarioConfig> = scenarios.iter().map(|s| s.config(base, Controller::Pg)).collect();
    let a = run_all(&proposed, jobs)?;
    let b = run_all(&pg, jobs)?;
    let sa: Vec<RunSummary> = a.iter().map(|o| o.summary.clone()).collect();
    let sb: Vec<RunSummary> = b.iter().map(|o| o.summary.clone()).collect();
    Ok((compare_table(&sa, &sb)?, a, b))
}
