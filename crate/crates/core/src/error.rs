use thiserror::Error;

use crate::boxes::ValidationReport;
use crate::slices::Criterion;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("mixture weight {weight} at position {index} is negative")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("mixture weights sum to {sum}, expected 1")]
    WeightSumMismatch { sum: f64 },
    #[error("box is signalling (max marginal deviation {residual:e})")]
    SignallingBox { residual: f64 },
    #[error("invalid box: {0}")]
    InvalidBox(ValidationReport),
    #[error("expected 16 probabilities, got {0}")]
    WrongLength(usize),
    #[error("unknown vertex name {0:?} (expected NLxyz or Lwxyz with binary digits)")]
    UnknownVertex(String),
    #[error("malformed box file: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("correlator {name} = {value} lies outside [-1, 1]")]
    OutOfRangeCorrelator { name: &'static str, value: f64 },
    #[error("sign convention violated: need C00, C10, C01 >= 0 and C11 <= 0, got {0:?}")]
    SignConventionViolated([f64; 4]),
    #[error(transparent)]
    Box(#[from] BoxError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SliceError {
    #[error("invalid mixture weights lambda={lambda}, eta={eta}")]
    InvalidWeights { lambda: f64, eta: f64 },
    #[error("{criterion} is not single-crossing along the ray at theta={theta}")]
    NonMonotoneAlongRay { theta: f64, criterion: Criterion },
    #[error("resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("ray count must be at least 1")]
    NoRays,
    #[error("unknown family {0:?} (expected e.g. NL000+NL010, NL000+L0000 or NL000)")]
    UnknownFamily(String),
    #[error(transparent)]
    Box(#[from] BoxError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("level count must be at least 1")]
    ZeroLevels,
    #[error("level count {0} exceeds the supported maximum of 24")]
    TooManyLevels(usize),
    #[error("Monte Carlo mode needs at least one trial")]
    NoTrials,
    #[error("operation requires {expected} mode")]
    WrongMode { expected: &'static str },
    #[error(transparent)]
    Box(#[from] BoxError),
}
