use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A size guard (quadratic DP, enumeration, table bound) was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// A series hit its term budget before the truncation criterion held.
    #[error(
        "series not converged after {terms} terms (log partial sum {log_partial_sum}, log tail bound {log_tail_bound})"
    )]
    SeriesNotConverged {
        terms: u64,
        log_partial_sum: f64,
        log_tail_bound: f64,
    },

    /// An alternating sum lost more digits than the guard allows.
    #[error("cancellation ratio {ratio:e} exceeds the precision guard {limit:e}")]
    Cancellation { ratio: f64, limit: f64 },

    /// A numerical optimizer failed to bracket or converge.
    #[error("optimizer failure: {0}")]
    Optimizer(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    /// True for numeric-guard failures, as opposed to invalid input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SeriesNotConverged { .. } | Error::Cancellation { .. } | Error::Optimizer(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
