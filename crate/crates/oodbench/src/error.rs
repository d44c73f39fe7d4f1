//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any layer of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at column {col})")]
    NotPositiveDefinite { col: usize, pivot: f64 },

    #[error("k = {k} exceeds pool size {n}")]
    PoolTooSmall { k: usize, n: usize },

    #[error("class {0} has no samples")]
    EmptyClass(i32),

    #[error("split fractions must be positive and sum to 1, got ({0}, {1}, {2})")]
    BadFractions(f64, f64, f64),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("invalid benchmark spec: {0}")]
    BadSpec(String),

    #[error("bad partition count: {0}")]
    BadPartitionCount(String),

    #[error("input collection is empty")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NotFinite(String),

    #[error("bad argument: {0}")]
    BadArgument(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("method {method} requires a {model} model")]
    MissingModel { method: String, model: String },

    #[error("validation set contains a single in/out class")]
    SingleClassValidation,

    #[error("labels contain a single class")]
    SingleClassInput,

    #[error("need at least two values")]
    TooFewValues,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error in {path} at {location}: {message}")]
    Schema {
        path: String,
        location: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
