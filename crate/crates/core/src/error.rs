use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("matrix is not skew-symmetric (‖M + Mᵀ‖ = {0:e})")]
    NotSkew(f64),
    #[error("rotation axis is not unit length (‖axis‖ = {0})")]
    NonUnitAxis(f64),
    #[error("saturation limit must be positive, got {0}")]
    NonPositiveLimit(f64),
    #[error("empty clamp interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("degenerate lift direction: ‖a_d − g‖ = {0:e}")]
    DegenerateLift(f64),
    #[error("argument out of domain: {0}")]
    Domain(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite vehicle state at t = {0} s")]
    Diverged(f64),
    #[error("physics step {0} s outside (0, 0.02]")]
    BadStep(f64),
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filter has not received a measurement yet")]
    Uninitialized,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("malformed configuration document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty sample")]
    Empty,
    #[error("seed mismatch between compared runs in scenario {scenario}: {left} vs {right}")]
    SeedMismatch { scenario: String, left: u64, right: u64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}
