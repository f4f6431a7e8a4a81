//! Error types shared across the core crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("pre-epoch record: timestamp {timestamp} precedes epoch {epoch}")]
    PreEpochRecord { timestamp: i64, epoch: i64 },

    #[error("unknown user {0}")]
    UnknownUser(u64),

    #[error("no estates to index")]
    NoEstates,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("class {class} has {count} members, fewer than k={k} folds")]
    ClassSmallerThanK { class: u32, count: usize, k: usize },

    #[error("invalid learner parameter: {0}")]
    InvalidParameter(String),

    #[error("feature column mismatch: model expects {expected}, got {got}")]
    ColumnMismatch { expected: usize, got: usize },

    #[error("model file format error: {0}")]
    ModelFormat(String),
}
