use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix exponential overflow: norm of M*x is {norm:e}")]
    ExpOverflow { norm: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite curve value at x = {x}")]
    NonFiniteCurve { x: f64 },

    #[error("degenerate family at y = {y:?}: all gradient rows vanish on the grid")]
    DegenerateFamily { y: Vec<f64> },

    #[error("non-finite intermediate in reconstruction at t = {t}")]
    NonFiniteReconstruction { t: f64 },

    #[error("drift returned a non-finite value on path {path} at step {step}")]
    NonFiniteDrift { path: usize, step: usize },

    #[error("contract in delivery: t = {t} is past delivery start {t1}")]
    ContractInDelivery { t: f64, t1: f64 },

    #[error("invalid path file: {0}")]
    PathFormat(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
