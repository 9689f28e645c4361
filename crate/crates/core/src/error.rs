//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by loaders, the model, and the sampler.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input while parsing a data file. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Actor index outside `1..=n_actors` in an input file.
    #[error("actor index {index} out of range 1..={n_actors} at line {line}")]
    ActorOutOfRange {
        index: i64,
        n_actors: usize,
        line: usize,
    },

    /// A tie value other than 0 or 1.
    #[error("non-binary tie value {value} at line {line}")]
    NonBinaryValue { value: String, line: usize },

    /// The same `(perceiver, sender, receiver)` cell appeared twice.
    #[error("duplicate cell (perceiver {perceiver}, sender {sender}, receiver {receiver})")]
    DuplicateCell {
        perceiver: usize,
        sender: usize,
        receiver: usize,
    },

    /// A self-tie cell `i -> i` carried a nonzero value.
    #[error("self-tie (actor {actor}, perceiver {perceiver}) must be absent or zero")]
    SelfTie { actor: usize, perceiver: usize },

    /// Not every off-diagonal cell of the tensor was given a value.
    #[error("incomplete tensor: {missing} of {expected} off-diagonal cells missing")]
    IncompleteTensor { missing: usize, expected: usize },

    /// Mismatched dimensions between data, covariates, or state blocks.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A quantity that must be strictly positive was not.
    #[error("{what} must be strictly positive, got {value}")]
    NotPositive { what: &'static str, value: f64 },

    /// A quantity that must be finite was not.
    #[error("{what} must be finite, got {value}")]
    NotFinite { what: &'static str, value: f64 },

    /// Invalid argument with context.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A covariate column had zero variance and cannot be standardized.
    #[error("covariate '{0}' has zero variance across dyads")]
    DegenerateCovariate(String),

    /// Attribute table field lookup failed.
    #[error("attribute field '{0}' not found")]
    UnknownField(String),

    /// A linear solve (Cholesky or SVD) failed; the block names the update.
    #[error("linear solve failed in {block}")]
    SolveFailed { block: &'static str },

    /// An operation needed more retained samples than were available.
    #[error("{what}: need at least {need}, got {got}")]
    NotEnough {
        what: &'static str,
        need: usize,
        got: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
