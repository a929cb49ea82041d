use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("merge rate {0} is not a power of two in 1..=32")]
    InvalidRate(usize),
    #[error("block rate mismatch: {left} vs {right}")]
    RateMismatch { left: usize, right: usize },
    #[error("block is not sorted at position {0}")]
    UnsortedBlock(usize),
    #[error("merge unit has no input left and nothing retained")]
    Drained,

    #[error("invalid merge tree (p={p}, l={l}): {reason}")]
    InvalidTree { p: usize, l: usize, reason: &'static str },
    #[error("wide tree needs four identical subtrees")]
    SubtreeMismatch,
    #[error("{feeds} feeds supplied to a tree with {leaves} leaves")]
    TooManyFeeds { feeds: usize, leaves: usize },
    #[error("feed for leaf {leaf} is not sorted at position {index}")]
    UnsortedFeed { leaf: usize, index: usize },
    #[error("cycle simulation stalled for {0} cycles without progress")]
    Deadlock(u64),

    #[error("index {index} out of range for {what} (limit {limit})")]
    OutOfRange { what: &'static str, index: usize, limit: usize },
    #[error("no bandwidth profile entry for pattern {m}x{m} at {burst} B bursts")]
    MissingProfileEntry { m: usize, burst: usize },
    #[error("write of {bytes} B to channel {channel} exceeds its capacity of {capacity} B")]
    ChannelOverflow { channel: usize, bytes: u64, capacity: u64 },

    #[error("{records} records exceed the sortable capacity of {capacity} records")]
    Capacity { records: u64, capacity: u64 },
    #[error("phase 2 expects {expected} feeds, got {actual}")]
    FeedCount { expected: usize, actual: usize },
    #[error("batched output is missing or short at batch {0}")]
    BatchIntegrity(usize),
    #[error("expected {expected} records, found {actual}")]
    LengthMismatch { expected: u64, actual: u64 },
    #[error("verification failed at index {index}: expected key {expected}, found {found}")]
    Verification { index: usize, expected: u64, found: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
