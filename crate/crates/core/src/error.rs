use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    /// A document that parsed but failed a field-level rule.
    #[error("{path}: {message} (line {line}, column {column})")]
    Document {
        path: String,
        message: String,
        line: usize,
        column: usize,
    },

    #[error("invalid scenario space: {0}")]
    InvalidSpace(ValidationReport),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("scenario has {got} entries but the space has {expected} features")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value index {index} out of range for feature {feature_id} ({len} values)")]
    IndexOutOfRange {
        feature_id: u32,
        index: usize,
        len: usize,
    },

    #[error("unknown feature id {0}")]
    UnknownFeature(u32),

    #[error("maximum difficulty score is zero; scores cannot be normalized")]
    DegenerateScore,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("delta must be positive")]
    ZeroDelta,

    #[error("bucket {k} is outside 0..={k_max}")]
    BucketOutOfRange { k: u32, k_max: u32 },

    #[error("bucket {0} has no scenarios")]
    EmptyBucket(u32),

    #[error("no admissible scenarios for this profile")]
    EmptyConstrainedSpace,

    #[error("constraint shape not supported by the fast counter: {0}")]
    UnsupportedShape(String),

    #[error("distribution error: {0}")]
    Distribution(String),

    #[error("scenario space too large for exact 64-bit counting")]
    SpaceTooLarge,

    #[error("arithmetic overflow in exact score computation")]
    Overflow,

    #[error("division by zero")]
    DivisionByZero,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
