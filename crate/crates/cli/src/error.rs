use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or missing inputs; exit code 2.
    #[error("{0}")]
    Usage(String),

    /// Invalid data or a failed computation; exit code 1.
    #[error(transparent)]
    Compute(#[from] rfsquid::Error),

    #[error("writing {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Output { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
