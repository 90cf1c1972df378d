use thiserror::Error;

/// Errors raised across the recommendation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a domain invariant (empty subject, bad enum, bad length).
    #[error("validation error: {0}")]
    Validation(String),

    /// One or more config fields violated their invariants.
    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),

    /// Components disagree about shape, e.g. embedding dimension.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A model endpoint could not be reached or returned a server error.
    #[error("transport error ({endpoint}): {message}")]
    Transport { endpoint: String, message: String },

    #[error("generation error: {0}")]
    Generation(String),

    /// Math on values outside an operation's domain (zero-norm vectors).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("training error: {0}")]
    Training(String),

    /// Malformed row in a line-oriented input file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Transport failures are worth retrying; everything else is not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
