use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum KsError {
    /// A precondition on an argument was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integer triple whose squared norm is not a perfect square.
    #[error("not on the rational sphere: |({x},{y},{z})|^2 = {norm_sq} is not a perfect square")]
    NotOnRationalSphere {
        x: String,
        y: String,
        z: String,
        norm_sq: String,
    },

    /// Malformed input data (ray-set files, report files, flag values).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A contract the data was supposed to satisfy failed at runtime,
    /// e.g. a dense colouring produced no domain points in a cap.
    #[error("inconsistency: {0}")]
    Inconsistency(String),

    /// A bug: internal cross-checks disagree.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, KsError>;
