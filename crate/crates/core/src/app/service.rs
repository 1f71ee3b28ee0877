use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ArtifactError, ModelArtifact};
use crate::corpus::{CaseType, Task};
use crate::pipeline::{ModelFamily, Representation, TaskText};

/// Loaded artifacts by id. Built once, then shared read-only.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    models: BTreeMap<String, Arc<ModelArtifact>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, artifact: ModelArtifact) -> Result<(), ArtifactError> {
        if self.models.contains_key(&artifact.id) {
            return Err(ArtifactError::DuplicateId(artifact.id));
        }
        self.models.insert(artifact.id.clone(), Arc::new(artifact));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Arc<ModelArtifact>> {
        self.models.get(id)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn list(&self) -> Vec<ModelInfo> {
        self.models
            .values()
            .map(|a| ModelInfo {
                id: a.id.clone(),
                task: a.task(),
                case_type: a.case_type,
                model: a.meta.model,
                representation: a.meta.representation,
                classes: a.catalog.classes().iter().map(|c| c.name.clone()).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: String,
    pub task: Task,
    pub case_type: CaseType,
    pub model: ModelFamily,
    pub representation: Representation,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub model: String,
    /// Task the caller expects the model to serve.
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub claim: String,
    #[serde(default)]
    pub answer: String,
    #[serde(default)]
    pub pleading: String,
    /// Evidence model to run on the same pleading.
    #[serde(default)]
    pub evidence_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbability {
    pub class: String,
    pub probability: f64,
}

/// `softmax` outputs form a distribution; `sigmoid` outputs are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePrediction {
    pub model: String,
    pub predicted: String,
    pub probabilities: Vec<ClassProbability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub model: String,
    pub task: Task,
    pub predicted: String,
    pub class_index: usize,
    pub output: OutputKind,
    /// One entry per catalog class, in catalog order.
    pub probabilities: Vec<ClassProbability>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<EvidencePrediction>,
    pub n_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    InvalidInput,
    TaskMismatch,
    BadRequest,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError { code, message: message.into() }
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

fn lookup<'r>(registry: &'r Registry, id: &str) -> Result<&'r Arc<ModelArtifact>, ApiError> {
    registry.get(id).ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("no model with id {id:?}")))
}

fn require_tokens(field: &str, text: &str, artifact: &ModelArtifact) -> Result<(), ApiError> {
    if crate::artext::preprocess(text, &artifact.pipeline.preprocess).is_empty() {
        return Err(ApiError::new(
            ErrorCode::InvalidInput,
            format!("{field} is empty after preprocessing (stop words, dates and punctuation are removed)"),
        ));
    }
    Ok(())
}

fn run(artifact: &ModelArtifact, text: &TaskText<'_>) -> Result<(usize, Vec<ClassProbability>, OutputKind, usize), ApiError> {
    match artifact.task() {
        Task::Judgment | Task::Evidence => require_tokens("pleading", text.pleading, artifact)?,
        Task::Probability => {
            require_tokens("claim", text.claim, artifact)?;
            require_tokens("answer", text.answer, artifact)?;
        }
    }
    let tokens = artifact.pipeline.tokens(text);
    let p = artifact
        .pipeline
        .predict_tokens(&tokens)
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
    let probs = artifact
        .catalog
        .classes()
        .iter()
        .zip(&p.probabilities)
        .map(|(c, &probability)| ClassProbability { class: c.name.clone(), probability })
        .collect();
    let kind = match &artifact.pipeline.model {
        crate::pipeline::FittedModel::Logreg { .. } => OutputKind::Softmax,
        crate::pipeline::FittedModel::Ovr { model } => match model.mapping {
            crate::classical::ProbabilityMapping::Softmax => OutputKind::Softmax,
            crate::classical::ProbabilityMapping::Sigmoid => OutputKind::Sigmoid,
        },
        crate::pipeline::FittedModel::Neural { model } => match model.arch().head {
            crate::neural::Head::Softmax => OutputKind::Softmax,
            crate::neural::Head::Sigmoid => OutputKind::Sigmoid,
        },
    };
    Ok((p.class, probs, kind, tokens.len()))
}

/// Runs a loaded artifact's full pipeline on the request text.
pub fn handle_predict(registry: &Registry, req: &PredictRequest) -> Result<PredictResponse, ApiError> {
    let artifact = lookup(registry, &req.model)?;
    if let Some(t) = req.task {
        if t != artifact.task() {
            return Err(ApiError::new(
                ErrorCode::TaskMismatch,
                format!("model {:?} serves the {} task, request asked for {t}", artifact.id, artifact.task()),
            ));
        }
    }
    let text = TaskText { claim: &req.claim, answer: &req.answer, pleading: &req.pleading };
    let (class, probabilities, output, n_tokens) = run(artifact, &text)?;

    let evidence = match &req.evidence_model {
        None => None,
        Some(id) => {
            let ev = lookup(registry, id)?;
            if ev.task() != Task::Evidence || ev.case_type != artifact.case_type {
                return Err(ApiError::new(
                    ErrorCode::TaskMismatch,
                    format!("model {id:?} is a {} {} model, not a {} evidence model", ev.case_type, ev.task(), artifact.case_type),
                ));
            }
            let (c, probs, _, _) = run(ev, &text)?;
            Some(EvidencePrediction { model: ev.id.clone(), predicted: ev.catalog.name(c).to_owned(), probabilities: probs })
        }
    };
    Ok(PredictResponse {
        model: artifact.id.clone(),
        task: artifact.task(),
        predicted: artifact.catalog.name(class).to_owned(),
        class_index: class,
        output,
        probabilities,
        evidence,
        n_tokens,
    })
}
