//! Model artifacts, the artifact registry, and the prediction handler
//! behind the HTTP service.

mod artifact;
mod service;

pub use artifact::{train_artifact, ArtifactMeta, ArtifactSpec, ModelArtifact, FORMAT_VERSION, MAGIC};
pub use service::{
    handle_predict, ApiError, ClassProbability, ErrorCode, EvidencePrediction, ModelInfo, OutputKind, PredictRequest,
    PredictResponse, Registry,
};

use thiserror::Error;

use crate::pipeline::PipelineError;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad magic {0:?}: not a model artifact (expected \"ALJP\")")]
    BadMagic(String),
    #[error("unsupported artifact format version {0} (this build reads version 1)")]
    UnsupportedVersion(u32),
    #[error("artifact truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} unexpected bytes after the artifact payload")]
    TrailingBytes(u64),
    #[error("malformed artifact payload: {0}")]
    Payload(#[from] serde_json::Error),
    #[error("inconsistent artifact: {0}")]
    Inconsistent(String),
    #[error("duplicate model id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}
