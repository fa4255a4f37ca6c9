use thiserror::Error;

/// Errors produced by the spectral solvers and their inputs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("|z| = {0} is off the unit circle")]
    OffUnitCircle(f64),

    #[error("boundary residual is undefined for the zero spinor")]
    ZeroSpinor,

    #[error("no gap state at k2 = {k2}: {reason}")]
    NoGapState { k2: f64, reason: String },

    #[error("no decaying direction at E = {energy}, k2 = {k2} (E lies outside the tail gap)")]
    NoDecayingDirection { energy: f64, k2: f64 },

    #[error("integration step {step} too large for decay rate {kappa} (kappa * step > 0.1)")]
    StepTooLarge { step: f64, kappa: f64 },

    #[error("matching function is not real (relative imaginary part {0:e})")]
    ComplexMatching(f64),

    #[error("normalization failed: {0}")]
    Normalization(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("eigensolver: {0}")]
    Eigensolver(String),

    #[error("branch tracking failed: {0}")]
    Tracking(String),

    #[error("window ({lo}, {hi}) is not strictly inside the gap (-{edge}, {edge})")]
    WindowOutsideGap { lo: f64, hi: f64, edge: f64 },

    #[error("switch function support not covered: {0}")]
    SwitchCoverage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
