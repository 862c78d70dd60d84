use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The scenario document is not valid structured text or misses a field.
    #[error("scenario parse error: {0}")]
    Parse(String),

    /// A parsed entity breaks one of its invariants.
    #[error("invalid {entity}: {reason}")]
    Invalid { entity: String, reason: String },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    /// A user sits exactly on a base station, so the path gain is undefined.
    #[error("degenerate geometry: user {user} coincides with base station {bs} in slot {slot}")]
    ZeroDistance { user: usize, slot: usize, bs: usize },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(entity: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            entity: entity.into(),
            reason: reason.into(),
        }
    }
}
