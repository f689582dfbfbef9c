use thiserror::Error;

/// Errors raised by the simulation library.
///
/// `Invalid*` variants are precondition failures the caller can fix by
/// changing inputs; the remaining variants report runtime conditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field operands live on different grids")]
    GridMismatch,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error(
        "a-priori bound violated at step {step} (t = {time}): max |u| = {max_abs}, bound = {bound}"
    )]
    BoundViolation {
        step: usize,
        time: f64,
        max_abs: f64,
        bound: f64,
    },

    #[error("path decomposition failed at step {step}: {reason}")]
    PathDecomposition { step: usize, reason: String },

    #[error("missing trajectory: {0}")]
    MissingTrajectory(String),

    #[error("time {time} outside stored trajectory [{start}, {end}]")]
    OutsideTrajectory { time: f64, start: f64, end: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
