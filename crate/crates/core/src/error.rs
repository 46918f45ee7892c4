use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(PathBuf),

    #[error("parse error in clip `{clip}` line {line}: {message}")]
    Parse {
        clip: String,
        line: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("clip `{0}` has no label")]
    LabelMissing(String),

    #[error("invalid fold count {k} for {clips} clips")]
    InvalidFoldCount { k: usize, clips: usize },

    #[error("both classes must be present (found {negatives} safe, {positives} risky)")]
    DegenerateClasses { negatives: usize, positives: usize },

    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    #[error("pixel ({u}, {v}) lies outside the calibrated road region")]
    OutOfCalibratedRegion { u: f64, v: f64 },

    #[error("unknown actor class `{0}`")]
    UnknownActorClass(String),

    #[error("clip `{clip}` frame {frame_index}: {source}")]
    Frame {
        clip: String,
        frame_index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op} expects a scalar, got shape {shape:?}")]
    Rank { op: &'static str, shape: Vec<usize> },

    #[error("label {0} is not binary")]
    Label(i64),

    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("tape was already back-propagated")]
    TapeConsumed,

    #[error("relation id {id} out of range for {count} relations")]
    RelationIndex { id: usize, count: usize },

    #[error("projection vector has zero norm")]
    DegenerateProjection,

    #[error("clip contains no frames")]
    EmptyClip,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::DegenerateCalibration(_)
            | Error::InvalidFoldCount { .. }
            | Error::VocabularyMismatch(_) => ErrorKind::Config,
            Error::Shape { .. }
            | Error::Rank { .. }
            | Error::MissingGradient(_)
            | Error::TapeConsumed
            | Error::RelationIndex { .. } => ErrorKind::Internal,
            Error::Frame { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
