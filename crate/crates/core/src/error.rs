use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fourier symbol is not finite at frequency {frequency:?}")]
    NonFiniteSymbol { frequency: Vec<f64> },

    #[error("negative mollifier symbol {value:e} at frequency {frequency:?}; no real square root")]
    NegativeSymbol { frequency: Vec<f64>, value: f64 },

    #[error("fractional smoothness s={s} is only supported for p=2")]
    UnsupportedNorm { s: f64 },

    #[error("mollifier under-resolved: epsilon={epsilon} needs at least n={required_n} points per axis")]
    UnderResolved { epsilon: f64, required_n: usize },

    #[error("not a probability density: {0}")]
    NotADensity(String),

    #[error("CFL violation: dt={dt} exceeds admissible dt={admissible_dt}")]
    Cfl { dt: f64, admissible_dt: f64 },

    #[error("time mismatch: force field at t={field_time} but particle clock at t={clock}")]
    TimeMismatch { field_time: f64, clock: f64 },

    #[error("need at least {required} {what}, got {got}")]
    TooFewSamples {
        what: &'static str,
        required: usize,
        got: usize,
    },

    #[error("non-finite value produced in {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Broad failure class, mapped onto process exit codes by the command line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Cfl { .. }
            | Error::NonFinite(_)
            | Error::NegativeSymbol { .. }
            | Error::NonFiniteSymbol { .. }
            | Error::TimeMismatch { .. } => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonFiniteSymbol { .. } => "non_finite_symbol",
            Error::NegativeSymbol { .. } => "negative_symbol",
            Error::UnsupportedNorm { .. } => "unsupported_norm",
            Error::UnderResolved { .. } => "under_resolved",
            Error::NotADensity(_) => "not_a_density",
            Error::Cfl { .. } => "cfl",
            Error::TimeMismatch { .. } => "time_mismatch",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::NonFinite(_) => "non_finite",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
