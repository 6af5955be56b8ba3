use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid spans: {0}")]
    Spans(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user-supplied data or configuration,
    /// as opposed to failures that happen while running a valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Record { .. }
                | Error::Read { .. }
                | Error::Spans(_)
                | Error::Config(_)
                | Error::Input(_)
                | Error::Statistics(_)
                | Error::Json(_)
                | Error::Checkpoint(_)
        )
    }
}

/// Reads a whole text file, naming the path on failure.
pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}
