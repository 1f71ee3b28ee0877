use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ArtifactError;
use crate::artext::TokenList;
use crate::corpus::{CaseSet, CaseType, LabelCatalog, Task};
use crate::eval::{PreprocessSettings, TOOLKIT_VERSION};
use crate::features::EmbeddingStore;
use crate::pipeline::{
    fit_pipeline, task_tokens, FitInfo, FitRequest, ModelFamily, Pipeline, PipelineError, Representation, StoreRef,
    TaskText, TrainSettings,
};

pub const MAGIC: [u8; 4] = *b"ALJP";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub seed: u64,
    pub toolkit_version: String,
    pub model: ModelFamily,
    pub representation: Representation,
}

/// A fitted pipeline plus everything needed to name its outputs.
///
/// On disk: `ALJP`, a little-endian `u32` format version, a little-endian
/// `u64` payload length, then the JSON payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub id: String,
    pub case_type: CaseType,
    pub catalog: LabelCatalog,
    pub pipeline: Pipeline,
    pub meta: ArtifactMeta,
}

impl ModelArtifact {
    pub fn task(&self) -> Task {
        self.pipeline.task
    }

    /// Catalog, task, case type and model shapes agree.
    pub fn validate(&self) -> Result<(), ArtifactError> {
        let bad = |m: String| Err(ArtifactError::Inconsistent(m));
        if self.id.trim().is_empty() {
            return bad("empty model id".into());
        }
        if self.catalog.task() != self.pipeline.task {
            return bad(format!("catalog is for {}, pipeline for {}", self.catalog.task(), self.pipeline.task));
        }
        if self.catalog.case_type() != self.case_type {
            return bad(format!("catalog is for {}, artifact for {}", self.catalog.case_type(), self.case_type));
        }
        if self.catalog.len() != self.pipeline.n_classes() {
            return bad(format!("{} catalog classes, model has {}", self.catalog.len(), self.pipeline.n_classes()));
        }
        self.pipeline.validate()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ArtifactError> {
        let payload = serde_json::to_vec(self)?;
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        Ok(out)
    }

    /// Parses and validates an artifact. An embedding store, if the
    /// featurizer needs one, is not attached yet.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        if bytes.len() < 4 {
            return Err(ArtifactError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
        }
        if bytes[..4] != MAGIC {
            return Err(ArtifactError::BadMagic(String::from_utf8_lossy(&bytes[..4]).into_owned()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(ArtifactError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(version));
        }
        let declared = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let actual = (bytes.len() - HEADER_LEN) as u64;
        if actual < declared {
            return Err(ArtifactError::Truncated {
                expected: HEADER_LEN + declared as usize,
                actual: bytes.len(),
            });
        }
        if actual > declared {
            return Err(ArtifactError::TrailingBytes(actual - declared));
        }
        let artifact: ModelArtifact = serde_json::from_slice(&bytes[HEADER_LEN..])?;
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| ArtifactError::Io { path: path.display().to_string(), source: e })
    }

    /// Loads an artifact and, when it averages word vectors, the embedding
    /// file it references (or `embeddings` if given), checking its hash.
    pub fn load(path: &Path, embeddings: Option<&Path>) -> Result<Self, ArtifactError> {
        let bytes = std::fs::read(path).map_err(|e| ArtifactError::Io { path: path.display().to_string(), source: e })?;
        let mut artifact = Self::from_bytes(&bytes)?;
        if let Some((recorded, _)) = artifact.pipeline.featurizer.store_reference() {
            let store_path = embeddings.map(Path::to_path_buf).unwrap_or_else(|| recorded.into());
            let store = EmbeddingStore::load(&store_path).map_err(crate::pipeline::PipelineError::from)?;
            artifact.attach_store(Arc::new(store))?;
        }
        Ok(artifact)
    }

    pub fn attach_store(&mut self, store: Arc<EmbeddingStore>) -> Result<(), ArtifactError> {
        self.pipeline.featurizer.attach_store(store)?;
        Ok(())
    }
}

/// What to fit when building an artifact from a case set.
#[derive(Debug, Clone)]
pub struct ArtifactSpec<'a> {
    pub id: String,
    pub task: Task,
    pub family: ModelFamily,
    pub representation: Representation,
    pub preprocess: &'a PreprocessSettings,
    pub settings: &'a TrainSettings,
    pub seed: u64,
    pub store: Option<&'a StoreRef>,
}

/// Fits a pipeline on every case in `cases` and wraps it as an artifact.
pub fn train_artifact(spec: &ArtifactSpec<'_>, cases: &CaseSet) -> Result<(ModelArtifact, FitInfo), ArtifactError> {
    cases.validate_for(spec.task).map_err(PipelineError::from)?;
    let preprocess = spec.preprocess.build().map_err(PipelineError::from)?;
    let docs: Vec<TokenList> = cases.cases.iter().map(|c| task_tokens(spec.task, &TaskText::from(c), &preprocess)).collect();
    let labels = cases.labels(spec.task);
    let catalog = cases.catalog(spec.task).retarget(spec.task).map_err(PipelineError::from)?;
    let req = FitRequest {
        task: spec.task,
        n_classes: catalog.len(),
        family: spec.family,
        representation: spec.representation,
        settings: spec.settings,
        seed: spec.seed,
        store: spec.store,
    };
    let (pipeline, info) = fit_pipeline(&req, &preprocess, &docs, &labels)?;
    let artifact = ModelArtifact {
        id: spec.id.clone(),
        case_type: cases.case_type(),
        catalog,
        pipeline,
        meta: ArtifactMeta {
            seed: spec.seed,
            toolkit_version: TOOLKIT_VERSION.to_owned(),
            model: spec.family,
            representation: spec.representation,
        },
    };
    artifact.validate()?;
    Ok((artifact, info))
}
