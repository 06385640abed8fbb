use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {msg}")]
    Malformed { path: PathBuf, line: usize, msg: String },

    #[error("line {line}: duplicate concept id {id:?}")]
    DuplicateId { line: usize, id: String },

    #[error("line {line}: concept {id:?} names unknown parent {parent:?}")]
    DanglingParent { line: usize, id: String, parent: String },

    #[error("line {line}: concept {id:?} lists itself as a parent")]
    SelfParent { line: usize, id: String },

    #[error("catalog is empty")]
    EmptyCatalog,

    #[error("embedding file: bad magic at byte 0 (expected \"COIREMB1\")")]
    BadMagic,

    #[error("embedding file: truncated at byte offset {offset} (expected {expected} bytes)")]
    Truncated { offset: u64, expected: u64 },

    #[error("embedding file: header declares {header} rows but ids file has {ids} lines")]
    CountMismatch { header: usize, ids: usize },

    #[error("embedding data length {len} is not rows ({rows}) x dim ({dim})")]
    ShapeMismatch { len: usize, rows: usize, dim: usize },

    #[error("embedding row {row} (id {id:?}) column {col} is not finite")]
    NonFinite { row: usize, id: String, col: usize },

    #[error("embedding dimension must be positive")]
    ZeroDim,

    #[error("duplicate embedding row id {0:?}")]
    DuplicateRowId(String),

    #[error("no vector for id {0:?}")]
    MissingVector(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("cosine undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid ssID {0:?}")]
    InvalidSsid(String),

    #[error("ssID {ssid} assigned to both {first:?} and {second:?}")]
    DuplicateSsid {
        ssid: String,
        first: String,
        second: String,
    },

    #[error("ssID {prefix} of {prefix_id:?} is a prefix of {ssid} of {id:?}")]
    PrefixConflict {
        prefix: String,
        prefix_id: String,
        ssid: String,
        id: String,
    },

    #[error("scorer returned non-finite score {score} for token {token}")]
    NonFiniteScore { token: String, score: f64 },

    #[error("scorer returned {got} scores for {expected} allowed tokens")]
    ScoreCount { expected: usize, got: usize },

    #[error("unknown query id {0:?}")]
    UnknownQuery(String),

    #[error("unknown passage id {0:?}")]
    UnknownPassage(String),

    #[error("concept {0:?} has no index assignment")]
    UnmappedConcept(String),

    #[error("empty embedding matrix")]
    EmptyMatrix,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
