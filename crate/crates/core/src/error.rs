use thiserror::Error;

/// Errors raised by the planning, estimation and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid depth model: {0}")]
    InvalidModel(String),

    #[error("depth {0} m is negative")]
    NegativeDepth(f64),

    #[error("measured depth {measured} m is below the error offset beta3 = {offset} m")]
    BelowOffset { measured: f64, offset: f64 },

    #[error("negative radicand {0} in depth bound (corrupted coefficients)")]
    NegativeRadicand(f64),

    #[error("target is not approaching (x1 = {x1} m, x2 = {x2} m)")]
    NotApproaching { x1: f64, x2: f64 },

    #[error("sampling interval must be positive, got {0} s")]
    NonPositiveInterval(f64),

    #[error("depth estimate at {0} m has no lower bound")]
    OutOfDomain(f64),

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("no sampling depth in (0, {x1}) m satisfies epsilon = {epsilon}")]
    EpsilonInfeasible { x1: f64, epsilon: f64 },

    #[error("lanes are parallel; intermediate control point is undefined")]
    ParallelLanes,

    #[error("curve parameter {0} outside [0, 1]")]
    TauOutOfRange(f64),

    #[error("curve derivative vanishes at tau = {0}; heading undefined")]
    UndefinedHeading(f64),

    #[error("speed must be positive, got {0} m/s")]
    NonPositiveSpeed(f64),

    #[error("arc length {s} m outside [0, {total}] m")]
    ArcLengthOutOfRange { s: f64, total: f64 },

    #[error("neighbor centerline does not cross segment {0}")]
    NoCrossing(&'static str),

    #[error("timestamps must be strictly increasing (index {0})")]
    NonMonotoneTime(usize),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
