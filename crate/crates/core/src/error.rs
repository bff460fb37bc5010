use thiserror::Error;

/// Errors raised by the solver and the verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A law or object violates its defining hypotheses.
    #[error("construction error: {0}")]
    Construction(String),
    /// An operation needs data the object does not carry.
    #[error("capability error: {0}")]
    Capability(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    /// Invalid numerical input (negative density, singular matrix, ...).
    #[error("input error: {0}")]
    Input(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("argument error: {0}")]
    Argument(String),
    /// A time step failed and may be retried with a smaller step.
    #[error("step error: {0}")]
    Step(String),
    /// A discrete invariant was violated beyond round-off.
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
