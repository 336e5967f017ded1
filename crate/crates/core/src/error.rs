use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("graph was already consumed by a backward pass without create_graph")]
    DeadGraph,
    #[error("double backward unavailable: {0}")]
    DoubleBackwardUnavailable(String),
    #[error("parameter layouts differ")]
    LayoutMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset has no classes")]
    EmptyDataset,
    #[error("requested split is empty")]
    EmptySplit,
    #[error("empty sample set")]
    EmptySet,
    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("too many validation classes: requested {requested} of {available}")]
    TooManyValidation { requested: usize, available: usize },
    #[error("invalid image size {0}")]
    InvalidSize(usize),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
