use thiserror::Error;

/// Failure modes shared across the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("shaft in contact with bore: {0}")]
    Contact(String),
    #[error("measurement out of range: {0}")]
    OutOfRange(String),
    #[error("no measurement available: {0}")]
    NoMeasurement(String),
    #[error("inconsistent resonant dips: {0}")]
    InconsistentDips(String),
    #[error("input dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kernel matrix is ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("optimizer found no feasible point")]
    NoFeasiblePoint,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("implausible film: {0}")]
    ImplausibleFilm(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Config,
            Error::IllConditioned(_) | Error::NoFeasiblePoint | Error::ImplausibleFilm(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Data,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(pos) => Error::Parse(format!("line {}: {}", pos.line(), e)),
            None => Error::Parse(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
