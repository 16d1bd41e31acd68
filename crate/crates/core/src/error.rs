use thiserror::Error;

/// Errors raised while reading numeric text matrices.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no numeric rows found")]
    Empty,
    #[error("line {line}: ragged row with {found} values, expected {expected}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-numeric token `{token}`")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: non-finite value `{token}`")]
    NonFinite { line: usize, token: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Every pooled distance is zero, so no bandwidth can be chosen.
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("degenerate kernel #{index} ({kernel}): normaliser is zero")]
    DegenerateKernel { index: usize, kernel: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown test id `{0}` (expected fuse_n, fuse_1, median or split)")]
    UnknownTest(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
