//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by scenario loading, graph construction, solving and
/// simulation. The CLI maps these onto stable process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A line of an input file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Two records describe the same entity at the same time.
    #[error("duplicate record: {0}")]
    Duplicate(String),

    /// Configuration values are missing, unknown or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with an argument outside its domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Geometric input that has no defined answer (e.g. bearing between
    /// coincident points).
    #[error("degenerate geometry: {0}")]
    Geometry(String),

    /// An instance exceeds a size cap meant to keep exhaustive search sane.
    #[error("instance too large: {0}")]
    Size(String),

    /// A solution refers to graph elements that do not exist.
    #[error("inconsistent solution: {0}")]
    Consistency(String),

    /// File system failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
