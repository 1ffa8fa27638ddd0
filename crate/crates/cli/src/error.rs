use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] refldiff_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration and input errors, 3 for numerical nonconvergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(refldiff_core::Error::NonConvergence { .. }) => 3,
            _ => 2,
        }
    }
}
