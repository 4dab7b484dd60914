use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum GpmError {
    #[error("hierarchy: {0}")]
    Hierarchy(String),

    #[error("node index {index} out of range (tree has {n_nodes} nodes)")]
    NodeOutOfRange { index: usize, n_nodes: usize },

    #[error("instance too large for exhaustive search: {what} ({actual} > {limit})")]
    TooLarge {
        what: &'static str,
        actual: u128,
        limit: u128,
    },

    #[error("pairwise table {table} violates the triangle inequality")]
    NonMetric { table: usize },

    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid synthetic config: field `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },

    #[error("monotonicity violated in {step}: {before} -> {after}")]
    Monotonicity {
        step: &'static str,
        before: f64,
        after: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GpmError>;
