use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Parameters violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A formula was evaluated outside the set where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are valid in principle but outside the supported accuracy range.
    #[error("out of range: {0}")]
    Range(String),

    /// An iterative method stopped before meeting its tolerance. `log` holds
    /// the residual history so callers can report it.
    #[error("{what} did not converge in {iterations} iterations (last residual {last:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
        log: Vec<f64>,
    },

    /// A quantity that is provably bounded came out of bounds.
    #[error("numerical pathology: {0}")]
    Pathology(String),

    /// Two independent evaluation routes disagree beyond tolerance.
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
