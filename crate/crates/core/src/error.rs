//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A WAV header field that rules the file out (wrong codec, channel
    /// count, truncation). `field` names the offending header field.
    #[error("wav format error in `{field}`: {detail}")]
    WavFormat { field: String, detail: String },

    /// Text-format parse failure (feature archive, CTM, vocab, trn) with a
    /// 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Precondition or shape violation on in-memory data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Utterances that need an alignment but have none.
    #[error("missing alignment for utterances: {}", .0.join(", "))]
    MissingAlignment(Vec<String>),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
