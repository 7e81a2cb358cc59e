use thiserror::Error;

/// Errors produced by the solver, the Galerkin reference and the diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("unsupported norm exponent or order: {0}")]
    UnsupportedNorm(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("corrupted state: {0}")]
    CorruptedState(String),

    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("CFL guard tripped: max|u| dt / h = {courant:.3} > 0.9")]
    Cfl { courant: f64 },

    #[error("state invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("requested {requested} basis modes but only {available} are resolved on this grid")]
    BasisTooLarge { requested: usize, available: usize },

    #[error("time range [{t0}, {t1}] is not covered by the velocity history")]
    TimeNotCovered { t0: f64, t1: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("series too short: need at least {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
