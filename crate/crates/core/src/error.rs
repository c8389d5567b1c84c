use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("label {y} outside the loss domain {domain}")]
    Domain { y: f64, domain: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel mismatch between RKHS functions")]
    KernelMismatch,

    #[error("{0} is not supported")]
    Unsupported(String),

    #[error("alphabet of size {size} exceeds the enumeration cap {cap}")]
    AlphabetTooLarge { size: usize, cap: usize },

    #[error("invalid probability table: {0}")]
    InvalidJoint(String),

    #[error("path of length {len} is too short for lag {lag}")]
    PathTooShort { len: usize, lag: usize },

    #[error("unbounded kernel requires a domain bound")]
    UnboundedKernel,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
