//! Simulator for vision-guided multicopter interception of aerial targets.
//!
//! Pipeline per control tick: synthetic camera with latency → delayed Kalman
//! filter in pixel space → two-plane proportional navigation (or pursuit) →
//! yaw PD and speed ramp for field-of-view holding → geometric attitude loop
//! → rigid-body dynamics.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod filter;
pub mod guidance;
pub mod mathcore;
pub mod monitor;
pub mod sensor;
pub mod simloop;

pub use config::{ConfigFile, Controller, MonteCarloConfig, SamplerConfig, ScenarioConfig};
pub use control::{Command, ControlParams, FovParams};
pub use dynamics::{Maneuver, MotionModel, TargetState, VehicleParams, VehicleState, WindModel};
pub use error::{ConfigError, DynamicsError, EvalError, FilterError, MathError};
pub use eval::{
    cep, compare, compare_table, montecarlo, quantile_nearest_rank, CompareTable, MonteCarloReport, MonteCarloSpec,
    MovingScenario,
};
pub use filter::{Dkf, DkfParams, PixelEstimate};
pub use guidance::{GuidanceParams, LosAngles};
pub use mathcore::{FrameConvention, Mat3, RotMatrix, Vec3};
pub use monitor::MonitorReport;
pub use sensor::{CameraIntrinsics, CameraMount, LatencyQueue, PixelObservation};
pub use simloop::{miss_distance, run, Outcome, RunOutput, RunSummary, StepRecord};
