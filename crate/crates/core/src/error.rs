use thiserror::Error;

/// Errors raised by fitting, comparison and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data or configuration failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Array shapes disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The design matrix does not have full column rank.
    #[error("rank-deficient design: column(s) {} are linear combinations of preceding columns", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    /// A computation could not produce a meaningful result.
    #[error("computation failed: {0}")]
    Computation(String),

    /// Output could not be written.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Dimension(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
