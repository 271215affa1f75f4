use thiserror::Error;

/// Error taxonomy for the whole pipeline.
///
/// `Parameter` and `Format` are caller mistakes (bad flags, malformed files),
/// `Resource` is a guard refusing work that would exceed a simulation or
/// overhead budget, and `Contract` flags internal structural violations such
/// as a non-cut gate spanning both halves of a cut plan.
#[derive(Debug, Error)]
pub enum QvrpError {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("resource guard: {0}")]
    Resource(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QvrpError>;

impl QvrpError {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            QvrpError::Resource(_) => 3,
            _ => 2,
        }
    }
}
