use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested size exceeds the configured table capacity.
    #[error("capacity exceeded: m = {m} is above the configured cap {cap}")]
    Capacity { m: usize, cap: usize },

    /// A numerical routine failed to reach its tolerance.
    #[error("numeric error: {message} (achieved error bound {achieved_error:e})")]
    Numeric {
        message: String,
        achieved_error: f64,
    },

    /// Unknown suite name or malformed suite configuration.
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
