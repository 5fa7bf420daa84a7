use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("annotation syntax error at line {line}: {message}")]
    AnnotationSyntax { line: usize, message: String },

    #[error("annotation geometry error at line {line}: {message}")]
    AnnotationGeometry { line: usize, message: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mixture fit needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("covariance of mixture component {component} is not positive definite")]
    NotPositiveDefinite { component: usize },

    #[error("cell {0} has no pixels")]
    EmptyCell(usize),

    #[error("annotation encloses no epithelium pixels")]
    DegenerateAnnotation,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("length mismatch: {predicted} predictions vs {reference} references")]
    LengthMismatch { predicted: usize, reference: usize },

    #[error("label set has no ordering")]
    UnorderedLabels,

    #[error("cell placement failed: {0}")]
    Placement(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
