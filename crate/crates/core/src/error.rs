//! Crate-wide error type.

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty information sequence")]
    EmptyInfo,

    #[error("memory too large: m={0} (limit 16)")]
    MemoryTooLarge(usize),

    #[error("ragged frame: {len} values is not a multiple of {n_out}")]
    RaggedFrame { len: usize, n_out: usize },

    #[error("frame shorter than window: {len} < {window}")]
    FrameShorterThanWindow { len: usize, window: usize },

    #[error("invalid code spec: {0}")]
    InvalidCodeSpec(String),

    #[error("invalid window config: {0}")]
    InvalidWindowConfig(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("not a CONVDEC-MLP file")]
    NotAModelFile,

    #[error("not a CONVDEC-DATA file")]
    NotADataFile,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("parse error at column {column}: {msg}")]
    ParseColumn { column: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
