//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by posekit operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Input vectors are (near-)parallel or too short to orthonormalize.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// A translation with non-positive depth where depth must be positive.
    #[error("point is behind the camera (t_z = {0})")]
    BehindCamera(f64),
    /// A normalized depth coordinate that cannot be decoded.
    #[error("invalid normalized depth (tau_z = {0})")]
    InvalidDepth(f64),
    /// Regressor-stage perspective features need a coarse translation.
    #[error("regressor stage requires a coarse translation estimate")]
    MissingCoarse,
    /// A scalar parameter outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// Mesh has too few vertices for the requested quantity.
    #[error("mesh must have at least {needed} vertices, has {got}")]
    TooFewVertices { needed: usize, got: usize },
    /// A coordinate falls outside the quantization range.
    #[error("out of range: {0}")]
    OutOfRange(String),
    /// Two inputs that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A probability vector does not sum to one.
    #[error("probabilities sum to {0}, expected 1 within 1e-5")]
    NotNormalized(f64),
    /// A loss term or weight is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Correlation window must be odd, positive and fit the volume.
    #[error("invalid correlation window {0}")]
    InvalidWindow(i64),
    /// Pyramid channel counts disagree with the declared architecture.
    #[error("pyramid spec violation at scale {scale}: expected {expected} channels, got {actual}")]
    SpecViolation {
        scale: usize,
        expected: usize,
        actual: usize,
    },
    /// Both rendered masks are empty; VSD is undefined.
    #[error("both renders are empty; VSD is undefined")]
    EmptyRender,
    /// An operation over a collection received no elements.
    #[error("empty input: {0}")]
    EmptyInput(String),
    /// An evaluation record references an asset that is not available.
    #[error("missing asset: {0}")]
    MissingAsset(String),
    /// A ground-truth image id has no camera entry.
    #[error("image {0} present in scene ground truth but not in camera file")]
    MissingCamera(u32),
    /// A file could not be parsed.
    #[error("parse error ({location}): {message}")]
    ParseError { location: String, message: String },
    /// A CSV cell holds the wrong number of fields.
    #[error("row {row}: expected {expected} fields in {cell}, got {got}")]
    FieldCount {
        row: usize,
        cell: String,
        expected: usize,
        got: usize,
    },
    /// A matrix claimed to be a rotation is not one.
    #[error("non-rigid transform: {0}")]
    NonRigid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ParseError {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
