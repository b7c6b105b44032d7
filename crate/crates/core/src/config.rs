//! Scenario configuration: one JSON document, every field defaulted, unknown
//! fields rejected. Angles are degrees in the document and radians inside.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControlParams;
use crate::dynamics::{Maneuver, MotionModel, VehicleParams, WindModel};
use crate::error::ConfigError;
use crate::filter::DkfParams;
use crate::guidance::GuidanceParams;
use crate::mathcore::Vec3;
use crate::sensor::{CameraIntrinsics, CameraMount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// PNG guidance with the FOV-holding attitude loop.
    #[default]
    Proposed,
    /// Pursuit guidance through the same attitude loop.
    Pg,
}

impl std::fmt::Display for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Controller::Proposed => "proposed",
            Controller::Pg => "pg",
        })
    }
}

impl std::str::FromStr for Controller {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Controller::Proposed),
            "pg" => Ok(Controller::Pg),
            other => Err(format!("unknown controller {other:?} (expected proposed|pg)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialState {
    /// m, earth frame.
    pub position: [f64; 3],
    /// m/s, earth frame.
    pub velocity: [f64; 3],
    /// Heading in degrees (0 = North, positive counter-clockwise). `null`
    /// points body-forward at the target.
    pub yaw_deg: Option<f64>,
}

impl Default for InitialState {
    fn default() -> Self {
        Self { position: [0.0, 0.0, 10.0], velocity: [0.0; 3], yaw_deg: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub width: f64,
    pub height: f64,
    /// Horizontal field of view, degrees. Ignored when `focal_px` is set.
    pub hfov_deg: f64,
    pub focal_px: Option<f64>,
    pub mount: CameraMount,
    /// Frame rate, Hz.
    pub rate_hz: f64,
    /// Detection latency, s.
    pub latency_s: f64,
    /// Pixel jitter standard deviation, px.
    pub pixel_noise_std: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 480.0,
            hfov_deg: 120.0,
            focal_px: None,
            mount: CameraMount::Forward,
            rate_hz: 30.0,
            latency_s: 0.1,
            pixel_noise_std: 1.5,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        match self.focal_px {
            Some(f) => CameraIntrinsics::from_focal(self.width, self.height, f, self.mount),
            None => CameraIntrinsics::from_hfov(self.width, self.height, self.hfov_deg.to_radians(), self.mount),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub physics_hz: f64,
    pub control_hz: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self { physics_hz: 500.0, control_hz: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorParams {
    /// Minimum transient excluded from the stability monitors, s.
    pub transient_s: f64,
    /// Transient as a fraction of the engagement; the larger of the two wins.
    pub transient_fraction: f64,
    /// Range below which monitors and FOV statistics stop, m.
    pub blind_range_m: f64,
    /// Sampling rate of the L₂ descent check, Hz.
    pub l2_sample_hz: f64,
    /// Window length for the LOS-rate trend check, s.
    pub los_window_s: f64,
    /// Allowed increase of the windowed mean |q̇|, rad/s.
    pub los_rate_tolerance: f64,
}

impl Default for MonitorParams {
    fn default() -> Self {
        Self {
            transient_s: 1.0,
            transient_fraction: 0.1,
            blind_range_m: 2.0,
            l2_sample_hz: 10.0,
            los_window_s: 0.5,
            los_rate_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub controller: Controller,
    pub vehicle: VehicleParams,
    pub initial: InitialState,
    pub target: MotionModel,
    pub camera: CameraConfig,
    pub dkf: DkfParams,
    pub guidance: GuidanceParams,
    pub control: ControlParams,
    pub wind: WindModel,
    pub rates: Rates,
    pub monitors: MonitorParams,
    /// Interception radius, m.
    pub capture_radius_m: f64,
    pub max_duration_s: f64,
    /// How long the target may stay out of view before the run ends, s.
    pub fov_grace_s: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "static".into(),
            seed: 0,
            controller: Controller::Proposed,
            vehicle: VehicleParams::default(),
            initial: InitialState::default(),
            target: MotionModel::new(Vec3::new(0.0, 25.0, 10.0), Maneuver::Static),
            camera: CameraConfig::default(),
            dkf: DkfParams::default(),
            guidance: GuidanceParams::default(),
            control: ControlParams::default(),
            wind: WindModel::default(),
            rates: Rates::default(),
            monitors: MonitorParams::default(),
            capture_radius_m: 0.08,
            max_duration_s: 30.0,
            fov_grace_s: 0.3,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.vehicle.validate().or_else(bad)?;
        self.target.validate().or_else(bad)?;
        self.dkf.validate().or_else(bad)?;
        self.guidance.validate().or_else(bad)?;
        self.control.validate().or_else(bad)?;
        self.wind.validate().or_else(bad)?;
        self.camera.intrinsics().validate().or_else(bad)?;

        let r = &self.rates;
        if !(r.physics_hz > 0.0 && r.control_hz > 0.0 && self.camera.rate_hz > 0.0) {
            return bad("rates must be positive".into());
        }
        if !(r.physics_hz >= r.control_hz && r.control_hz >= self.camera.rate_hz) {
            return bad("rates must satisfy physics ≥ control ≥ camera".into());
        }
        if 1.0 / r.physics_hz > crate::dynamics::MAX_PHYSICS_DT {
            return bad("physics rate must be at least 50 Hz".into());
        }
        let ratio = r.physics_hz / r.control_hz;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("physics rate must be an integer multiple of the control rate".into());
        }
        if !(self.camera.latency_s >= 0.0 && self.camera.pixel_noise_std >= 0.0) {
            return bad("camera latency and noise must be non-negative".into());
        }
        if !(self.capture_radius_m > 0.0) {
            return bad("capture radius must be positive".into());
        }
        if !(self.max_duration_s > 0.0 && self.fov_grace_s >= 0.0) {
            return bad("durations must be positive".into());
        }
        let m = &self.monitors;
        if !(m.transient_s >= 0.0 && m.blind_range_m >= 0.0 && m.l2_sample_hz > 0.0 && m.los_window_s > 0.0) {
            return bad("monitor parameters out of range".into());
        }
        if !(0.0..1.0).contains(&m.transient_fraction) {
            return bad("transient fraction must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// Non-fatal advisories (gains outside their recommended ranges).
    pub fn warnings(&self) -> Vec<String> {
        self.guidance.warnings()
    }

    pub fn physics_dt(&self) -> f64 {
        1.0 / self.rates.physics_hz
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.rates.control_hz
    }

    pub fn physics_substeps(&self) -> usize {
        (self.rates.physics_hz / self.rates.control_hz).round() as usize
    }
}

/// Target sampler for Monte Carlo suites around the initial vehicle position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Slant range interval, m.
    pub range_m: [f64; 2],
    /// Azimuth interval about North, degrees.
    pub azimuth_deg: [f64; 2],
    /// Altitude offset interval relative to the interceptor, m.
    pub altitude_offset_m: [f64; 2],
    /// Minimum target altitude, m.
    pub min_altitude_m: f64,
    /// Largest initial heading error away from the target, degrees.
    pub heading_error_deg: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            range_m: [15.0, 35.0],
            azimuth_deg: [-60.0, 60.0],
            altitude_offset_m: [-9.0, 5.0],
            min_altitude_m: 1.0,
            heading_error_deg: 15.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ordered = |r: [f64; 2]| r[0] <= r[1];
        if !(self.range_m[0] > 0.0 && ordered(self.range_m)) {
            return Err(ConfigError::Invalid("sampler range must be a positive interval".into()));
        }
        if !(ordered(self.azimuth_deg) && ordered(self.altitude_offset_m) && self.heading_error_deg >= 0.0) {
            return Err(ConfigError::Invalid("sampler intervals must be ordered".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub sampler: SamplerConfig,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { runs: 50, sampler: SamplerConfig::default() }
    }
}

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub scenario: ScenarioConfig,
    pub montecarlo: MonteCarloConfig,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        self.montecarlo.sampler.validate()?;
        if self.montecarlo.runs == 0 {
            return Err(ConfigError::Invalid("montecarlo.runs must be ≥ 1".into()));
        }
        for w in self.scenario.warnings() {
            log::warn!("{w}");
        }
        Ok(())
    }
}
