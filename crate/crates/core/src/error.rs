use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the mathematical domain of an operation (e.g. `x ∉ [0,1]`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numerical procedure failed (singular system, quadrature blow-up, ...).
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The EM iteration hit an observation whose probability is zero.
    #[error("degenerate iterate: observation {0} has zero probability; restart from an interior point")]
    Degenerate(usize),

    /// An estimate lacks a property a downstream computation relies on.
    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    /// Malformed input data (CSV rows, config values).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures caused by the numbers rather than by the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::Degenerate(_) | Error::DegenerateEstimate(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
