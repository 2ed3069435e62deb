use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the model (e.g. a noise
    /// variance of zero, which the investment technology makes unreachable).
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario file failed validation. The message names the offending field.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// An internal invariant was violated (should not happen for valid inputs).
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn scenario(msg: impl Into<String>) -> Self {
        Error::Scenario(msg.into())
    }
}
