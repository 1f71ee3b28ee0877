//! Metrics, grid search and the experiment runner.

mod experiment;
mod grid;
mod metrics;

pub use experiment::{
    run_experiment, DataSummary, ExperimentConfig, ExperimentReport, PreprocessSettings, ReportRow, RowTiming, Timings,
    TOOLKIT_VERSION,
};
pub use grid::{grid_search, train_point, GridPoint, GridResult, GridScore};
pub use metrics::{confusion, macro_metrics, ClassMetrics, ConfusionMatrix, MetricsReport};

use thiserror::Error;

use crate::artext::TextError;
use crate::classical::ClassicalError;
use crate::corpus::CorpusError;
use crate::pipeline::PipelineError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} true labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("confusion matrix must be square")]
    NotSquare,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("validation split is empty")]
    EmptyValidation,
    #[error("word2vec rows need an embedding file")]
    MissingEmbeddings,
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Pipeline(Box<PipelineError>),
}

impl From<PipelineError> for EvalError {
    fn from(e: PipelineError) -> Self {
        EvalError::Pipeline(Box::new(e))
    }
}

impl PartialEq for EvalError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}
