use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    #[error("{context}: domain error: {detail}")]
    Domain { context: &'static str, detail: String },

    /// Result would overflow (or silently underflow) the supported range.
    #[error("{context}: range error: {detail}")]
    Range { context: &'static str, detail: String },

    /// Iterative or adaptive evaluation failed to reach its tolerance.
    #[error("{context}: no convergence: {detail}")]
    NonConvergence { context: &'static str, detail: String },

    /// A model or configuration parameter violates its invariant. `key`
    /// names the offending parameter.
    #[error("invalid parameter `{key}`: {detail}")]
    InvalidParam { key: String, detail: String },

    /// Two inputs that must agree (grids, seeds, shapes) do not.
    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn range(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Range {
            context,
            detail: detail.into(),
        }
    }

    pub fn invalid(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::InvalidParam {
            key: key.into(),
            detail: detail.into(),
        }
    }
}
