use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// The requested combination of parameters has no rate function.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative method failed to reach its tolerance.
    #[error("no convergence in {op}: {detail}")]
    Convergence { op: &'static str, detail: String },

    /// A batch would exceed the configured memory budget.
    #[error("batch of {requested} elements exceeds the memory budget of {budget}")]
    Resource { requested: u128, budget: u128 },

    #[error("empty sample")]
    EmptySample,
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn convergence(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Convergence {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
