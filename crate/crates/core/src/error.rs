use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("face {face}: vertex index {index} out of range ({vertex_count} vertices)")]
    FaceIndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },

    #[error("face {face}: has {len} vertices, only triangles are supported")]
    NonTriangularFace { face: usize, len: usize },

    #[error("face {face}: repeats a vertex index")]
    RepeatedFaceVertex { face: usize },

    #[error("face {face}: texcoord list has {len} values, expected 6")]
    TexcoordArity { face: usize, len: usize },

    #[error("face {face}: references unknown texture {texture}")]
    UnknownTexture { face: usize, texture: i64 },

    #[error("face {face}: class {class} outside [0, {class_count})")]
    ClassOutOfRange {
        face: usize,
        class: i64,
        class_count: u32,
    },

    #[error("{path}: unsupported texture image: {detail}")]
    UnsupportedImage { path: PathBuf, detail: String },

    #[error("channel `{channel}` has {len} entries, expected {expected}")]
    ChannelLength {
        channel: &'static str,
        len: usize,
        expected: usize,
    },

    #[error("point {index} has non-finite coordinates")]
    NonFinite { index: usize },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },

    #[error("face {face} has a degenerate UV triangle")]
    DegenerateUv { face: usize },

    #[error("mesh has zero total surface area")]
    ZeroArea,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point cloud has no labeled points")]
    NoLabeledPoints,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("point {point} is not covered by any tile")]
    CoverageGap { point: usize },

    #[error("face {face}: predicted class {class} outside [0, {class_count})")]
    PredictionOutOfRange {
        face: usize,
        class: usize,
        class_count: usize,
    },

    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::DegenerateFace { .. } | Error::DegenerateUv { .. } => ErrorKind::Internal,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
