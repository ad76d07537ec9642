//! Error types shared across the solver.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("non-positive determinant of the deformation gradient (det = {det})")]
    NonPositiveDeterminant { det: f64 },

    #[error("negative temperature {theta} passed to a constitutive evaluation")]
    NegativeTemperature { theta: f64 },

    #[error("temperature exponent alpha = {alpha} outside [1, 2]")]
    AlphaOutOfRange { alpha: f64 },

    #[error("material parameter check failed: {0}")]
    InvalidMaterial(String),

    #[error("grid too small: need at least 3 nodes per axis, got {nx} x {ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid initial datum: {0}")]
    InvalidInitialDatum(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mechanical line search failed at step {step} (could not keep det > 0 or decrease the objective)")]
    LineSearchFailed { step: usize },

    #[error("iteration limit reached at step {step}: residual {residual:.3e} > tolerance {tol:.3e}")]
    MaxIterExceeded { step: usize, residual: f64, tol: f64 },

    #[error("Newton iteration for the thermal step diverged at step {step} (residual {residual:.3e})")]
    NewtonDiverged { step: usize, residual: f64 },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("evaluation time {t} outside [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },

    #[error("parameter ladder insufficient: {0}")]
    InsufficientLadder(String),

    #[error("tau ladder is not nested: {0}")]
    NonNestedLadder(String),

    #[error("norm exponent out of range: {0}")]
    NormExponentOutOfRange(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
