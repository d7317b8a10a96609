use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid subsystem shape: {0}")]
    InvalidShape(String),

    #[error("subsystem index {index} out of range for {len} subsystems")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("operator is not Hermitian (max |a - a^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("operator contains non-finite entries")]
    NonFinite,

    #[error("invalid parameter {name} = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("requested ambient dimension {requested} exceeds the configured cap {cap}")]
    CapExceeded { requested: u128, cap: usize },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("unknown strategy '{name}' (available: {available})")]
    UnknownStrategy { name: String, available: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            constraint,
        }
    }
}
