use thiserror::Error;

/// Errors raised across the simulation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("negative Sobolev order {0} is not supported")]
    NegativeOrder(f64),

    #[error("L^p exponent must be >= 1 (got {0})")]
    InvalidExponent(f64),

    #[error("heat time must be >= 0 (got {0})")]
    NegativeHeatTime(f64),

    #[error("ellipticity violated at grid point {index}: eigenvalue {value} outside [{lower}, {upper}]")]
    EllipticityViolation {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown coefficient component `{0}`")]
    UnknownCoefficient(String),

    #[error("solution blew up at step {step} (max |u| = {max_abs:e})")]
    BlowUp { step: usize, max_abs: f64 },

    #[error("solver configuration error: {0}")]
    Config(String),

    #[error("noise path has {got} steps, solver expects {expected}")]
    NoiseMismatch { expected: usize, got: usize },

    #[error("weak residual requires a trajectory recorded at every step")]
    RecordEveryRequired,

    #[error("{blown} of {total} paths blew up (limit 1%)")]
    TooManyBlowUps { blown: usize, total: usize },

    #[error("could not refine noise increment exactly at mode {mode}, step {step}")]
    RefinementFailed { mode: usize, step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
