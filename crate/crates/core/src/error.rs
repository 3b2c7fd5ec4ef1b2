use thiserror::Error;

/// Errors produced by the retrieval engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error in image `{image_id}`: {message}")]
    Schema { image_id: String, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate keypoint bounding box for image `{0}`")]
    DegenerateBbox(String),

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("image `{0}` not found")]
    NotFound(String),

    #[error("feature vector for `{id}` has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("no feature vector attached for `{0}`")]
    MissingFeatures(String),

    #[error("entries without class label: {}", .0.join(", "))]
    Unlabeled(Vec<String>),

    #[error("incompatible index version {found} (supported: {supported})")]
    IncompatibleVersion { found: u32, supported: u32 },

    #[error("index integrity check failed: {0}")]
    Integrity(String),

    #[error("record does not belong to the given canvases: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
