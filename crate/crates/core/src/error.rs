use thiserror::Error;

/// Errors surfaced by tensor construction, graph building and execution.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (extents, partitioning, worker counts, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid graph construction (frozen graph mutated, cycles, mismatched
    /// block grids, padded modifier on an unpadded tensor, ...).
    #[error("graph build error: {0}")]
    Build(String),

    /// Out-of-range component, lane or cell index.
    #[error("index error: {0}")]
    Index(String),

    /// A linear arena ran out of space.
    #[error("arena exhausted: requested {requested} bytes, {remaining} remaining")]
    ArenaExhausted { requested: usize, remaining: usize },

    /// Operation not supported by the receiver (e.g. global index on a
    /// block-local iterator).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A graph node failed during execution; the activation was aborted.
    #[error("task failed: {0}")]
    Task(String),

    /// API misuse (e.g. submitting an unfrozen graph).
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid input to a pure computation (e.g. nonpositive timings).
    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
