use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants are grouped by how a caller should react: contract violations
/// (bad dimensions, non-finite input, out-of-range parameters) are bugs in
/// the caller, while refusals mean the request is well-formed but exceeds a
/// documented budget.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("quadrature budget exceeded: {0}")]
    Budget(String),

    #[error("Fock truncation too small: {0}")]
    Truncation(String),

    #[error("operator not supported here: {0}")]
    Unsupported(String),

    #[error("Gaussian integral diverges: pivot {pivot} has non-positive real part")]
    Divergent { pivot: String },

    #[error("constraint violated: {0}")]
    Constraint(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
