use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: node id does not fit in 64 bits")]
    IdOverflow { line: usize },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("too many distinct nodes ({0}); at most 2^32 - 1 are supported")]
    TooManyNodes(usize),

    #[error("node {node} out of range (n = {n})")]
    NodeOutOfRange { node: u64, n: usize },

    #[error("unknown node id {0}")]
    UnknownNode(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index does not match graph: {0}")]
    IndexMismatch(String),

    #[error("bad index magic (not a PRSIMIDX file)")]
    BadMagic,

    #[error("unsupported index version {0}")]
    UnsupportedVersion(u32),

    #[error("index file truncated")]
    Truncated,

    #[error("corrupt index: {0}")]
    Corrupt(String),

    #[error("graph too large for dense oracle: n = {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn check_decay(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "decay factor c must satisfy 0 < c < 1 (got {c})"
        )))
    }
}
