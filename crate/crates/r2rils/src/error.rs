use crate::model::IterationTrace;

/// Errors produced by the completion library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("entry ({i}, {j}) out of range for a {m}x{n} matrix")]
    IndexOutOfRange { i: usize, j: usize, m: usize, n: usize },

    #[error("duplicate observed entry ({i}, {j})")]
    DuplicateEntry { i: usize, j: usize },

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("column {col} has norm below the degeneracy threshold")]
    DegenerateColumn { col: usize },

    #[error("degenerate subspace at iteration {iteration}")]
    DegenerateSubspace {
        iteration: usize,
        trace: Box<IterationTrace>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("problem too large to materialize ({rows}x{cols})")]
    MaterializeTooLarge { rows: usize, cols: usize },

    #[error("observation sampling failed: row/column coverage not met after {0} redraws")]
    RedrawCapExceeded(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
