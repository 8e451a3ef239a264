use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("estimation window around z0 = {z0} with h = {h} contains no design point (n = {n})")]
    EmptyWindow { n: usize, z0: f64, h: f64 },

    #[error("bandwidth {h} moves [z0 - h, z0 + h] outside [0, 1] (z0 = {z0})")]
    WindowOutsideUnitInterval { z0: f64, h: f64 },

    #[error("operation requires Gaussian noise, got `{0}`")]
    NonGaussianNoise(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("function `{label}` is not certified in the weak Hölder class (delta = {delta})")]
    NotCertified { label: String, delta: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
