use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KpoError {
    #[error("invalid Fock dimension {dim}: at least 2 levels are required")]
    InvalidDimension { dim: usize },

    #[error("truncation too small for |alpha| = {alpha_abs}: dim {dim} must exceed {required:.1}")]
    TruncationWarning {
        alpha_abs: f64,
        dim: usize,
        required: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "ambiguous level labels: levels {level_a} and {level_b} both claim {label} \
         (overlaps {overlap_a:.6} and {overlap_b:.6})"
    )]
    LabelAmbiguity {
        level_a: usize,
        level_b: usize,
        label: String,
        overlap_a: f64,
        overlap_b: f64,
    },

    #[error("energy ordering of the wells changed: level {level} carries {found}, expected {expected}")]
    LevelOrderChanged {
        level: usize,
        expected: String,
        found: String,
    },

    #[error("step size underflow at t = {t}: h = {step:e}")]
    Stiffness { t: f64, step: f64 },

    #[error("integrator failure: trace drift {drift:e} exceeds {limit:e}")]
    IntegratorFailure { drift: f64, limit: f64 },

    #[error("singular denominator for transition ({m}, {n}): |d| = {magnitude:e}")]
    SingularDenominator { m: usize, n: usize, magnitude: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("probe insensitive to rho00: |Gamma(1) - Gamma(0)| = {separation:e}")]
    InsensitiveProbe { separation: f64 },

    #[error("measurement {value} outside [0, 1]")]
    MeasurementRange { value: f64 },

    #[error("averaging window [{start}, {end}] contains no samples")]
    EmptyWindow { start: f64, end: f64 },
}

pub type Result<T, E = KpoError> = std::result::Result<T, E>;
