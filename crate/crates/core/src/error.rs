use thiserror::Error;

/// Errors raised by the model, analytics, sampling and fitting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model parameter violates one of the model invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    /// The operation needs the power-law weight rule `|mu_n| = |lambda_n|^delta`.
    #[error("{0} requires power-law noise weights")]
    RequiresPowerLaw(&'static str),
    /// A floating-point evaluation produced a value that cannot be explained by rounding.
    #[error("numeric fault: {0}")]
    NumericFault(String),
}

pub type Result<T> = std::result::Result<T, Error>;
