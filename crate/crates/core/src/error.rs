use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "truncation too small: n_max = {n_max} but {required} levels are needed ({reason})"
    )]
    TruncationTooSmall {
        n_max: usize,
        required: usize,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mean photon number must be positive")]
    ZeroField,

    #[error("field too small for dipole-state preparation: n_bar = {n_bar} < {min}")]
    FieldTooSmall { n_bar: f64, min: f64 },

    #[error("integration step too large: {detail}")]
    StepTooLarge { detail: String },

    #[error("atomic outcome has zero probability")]
    ZeroProbabilityOutcome,

    #[error("peak fit did not converge: {detail}")]
    FitDidNotConverge { detail: String },

    #[error("expected {expected} peaks but found {found} (fit residual {residual:.3e})")]
    PeakCountMismatch {
        expected: usize,
        found: usize,
        residual: f64,
    },

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
