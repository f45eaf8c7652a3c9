use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the region where the function is defined or supported.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter hits a pole or an excluded value.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// `R_n` vanished with a nonzero right-hand side during forward recursion.
    #[error("recurrence is resonant at n = {n}: R_n = 0 with nonzero numerator")]
    ResonantRecurrence { n: usize },

    /// Series or iteration did not converge within its cap.
    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("integration failed: {0}")]
    Integration(String),

    /// Linear system with (numerically) vanishing determinant.
    #[error("singular system: {0}")]
    Singular(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
