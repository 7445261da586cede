//! Crate-wide error type.

use thiserror::Error;

/// Error categories map onto the CLI exit codes: `Config` exits with 2,
/// everything else (bad or inconsistent input data, I/O) exits with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    /// Parse failure in a frame log, with the 1-based line number.
    #[error("line {line}: {message}")]
    LogParse { line: usize, message: String },

    /// Frames must arrive with strictly increasing `frame_index`.
    #[error("frame {frame} arrived after frame {last}; frame_index must be strictly increasing")]
    FrameOrder { frame: u64, last: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
