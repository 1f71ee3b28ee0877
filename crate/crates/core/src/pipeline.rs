//! Text-to-label pipelines: task routing, featurizer, and fitted model.
//!
//! The experiment runner fits one pipeline per (model, representation)
//! row; model artifacts persist a fitted pipeline.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artext::{preprocess, PreprocessConfig, TokenList};
use crate::classical::{
    ClassicalError, KernelSpec, LogRegConfig, LogRegModel, OvrModel, OvrPrediction, ProbabilityMapping, SmoConfig,
};
use crate::corpus::{stratified_indices, Case, CorpusError, Task};
use crate::eval::{grid_search, train_point, GridPoint, GridResult};
use crate::features::{
    average_embedding, encode_sequence, fit_vocab, EmbeddingStore, FeatureError, IndexSequence, TfidfOptions,
    TfidfVectorizer, Vocabulary, DEFAULT_MAXLEN,
};
use crate::neural::{self, init_model, ArchSpec, EmbeddingInit, Head, History, NeuralError, SeqClassifier, Target, TrainConfig};
use crate::numkit::{argmax, Matrix, NumError, RngState};

/// Reserved token joining claim and answer for the probability task.
pub const SEP_TOKEN: &str = "<SEP>";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("word2vec representation needs an embedding store")]
    MissingStore,
    #[error("embedding store hash {actual} does not match the expected {expected}")]
    StoreMismatch { expected: String, actual: String },
    #[error("inconsistent pipeline: {0}")]
    Inconsistent(String),
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Eval(Box<crate::eval::EvalError>),
    #[error("{0} documents but {1} labels")]
    LengthMismatch(usize, usize),
}

impl From<crate::eval::EvalError> for PipelineError {
    fn from(e: crate::eval::EvalError) -> Self {
        PipelineError::Eval(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Svm,
    Lr,
    Lstm,
    Bilstm,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [ModelFamily::Svm, ModelFamily::Lr, ModelFamily::Lstm, ModelFamily::Bilstm];

    pub fn label(self) -> &'static str {
        match self {
            ModelFamily::Svm => "SVM",
            ModelFamily::Lr => "LR",
            ModelFamily::Lstm => "LSTM",
            ModelFamily::Bilstm => "BILSTM",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelFamily::Lstm | ModelFamily::Bilstm)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Tfidf,
    Word2vec,
}

impl Representation {
    pub const ALL: [Representation; 2] = [Representation::Tfidf, Representation::Word2vec];

    pub fn label(self) -> &'static str {
        match self {
            Representation::Tfidf => "TFIDF",
            Representation::Word2vec => "Word2Vec",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Report row name such as `SVM-TFIDF` or `BILSTM-Word2Vec`.
pub fn row_name(family: ModelFamily, representation: Representation) -> String {
    format!("{}-{}", family.label(), representation.label())
}

/// The raw text fields of one case.
#[derive(Debug, Clone, Copy, Default)]
pub struct TaskText<'a> {
    pub claim: &'a str,
    pub answer: &'a str,
    pub pleading: &'a str,
}

impl<'a> From<&'a Case> for TaskText<'a> {
    fn from(c: &'a Case) -> Self {
        TaskText { claim: &c.claim, answer: &c.answer, pleading: &c.pleading }
    }
}

/// Judgment and evidence read the pleading; probability reads
/// `claim <SEP> answer`.
pub fn task_tokens(task: Task, text: &TaskText<'_>, cfg: &PreprocessConfig) -> TokenList {
    match task {
        Task::Judgment | Task::Evidence => preprocess(text.pleading, cfg),
        Task::Probability => {
            let mut t = preprocess(text.claim, cfg);
            t.push_reserved(SEP_TOKEN);
            t.extend(preprocess(text.answer, cfg));
            t
        }
    }
}

/// Head used for a task: independent sigmoids for the probability task.
pub fn task_head(task: Task) -> Head {
    match task {
        Task::Probability => Head::Sigmoid,
        Task::Judgment | Task::Evidence => Head::Softmax,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralSettings {
    pub maxlen: usize,
    /// Used with TF-IDF; Word2Vec rows take the store's dimension.
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub bilstm_units: usize,
    pub dense_units: usize,
    pub train: TrainConfig,
}

impl Default for NeuralSettings {
    fn default() -> Self {
        NeuralSettings {
            maxlen: DEFAULT_MAXLEN,
            embed_dim: 300,
            lstm_units: 300,
            bilstm_units: 64,
            dense_units: 300,
            train: TrainConfig::default(),
        }
    }
}

pub fn default_svm_grid() -> Vec<KernelSpec> {
    let cs = [0.1, 1.0, 10.0, 100.0];
    let gammas = [0.001, 0.01, 0.1, 1.0];
    let mut grid: Vec<KernelSpec> = cs.iter().map(|&c| KernelSpec::linear(c)).collect();
    for &c in &cs {
        for &g in &gammas {
            grid.push(KernelSpec::rbf(c, g));
        }
    }
    grid
}

/// Everything needed to fit a pipeline besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub tfidf: TfidfOptions,
    pub svm_grid: Vec<KernelSpec>,
    /// L2 strengths searched for logistic regression.
    pub lr_grid: Vec<f64>,
    pub logreg: LogRegConfig,
    pub smo: SmoConfig,
    /// Share of the training cases held out for grid search and epoch selection.
    pub valid_fraction: f64,
    pub neural: NeuralSettings,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            tfidf: TfidfOptions::default(),
            svm_grid: default_svm_grid(),
            lr_grid: vec![1e-4, 1e-3, 1e-2, 0.1],
            logreg: LogRegConfig::default(),
            smo: SmoConfig::default(),
            valid_fraction: 0.2,
            neural: NeuralSettings::default(),
        }
    }
}

/// An embedding store together with the path it was read from.
#[derive(Debug, Clone)]
pub struct StoreRef {
    pub path: String,
    pub store: Arc<EmbeddingStore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Featurizer {
    Tfidf {
        vectorizer: TfidfVectorizer,
    },
    /// Mean word vector; the store is referenced by content hash and
    /// attached after loading.
    AveragedEmbedding {
        path: String,
        sha256: String,
        dim: usize,
        #[serde(skip)]
        store: Option<Arc<EmbeddingStore>>,
    },
    Sequence {
        vocab: Vocabulary,
        maxlen: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(Vec<f64>),
    Sequence(IndexSequence),
}

impl Featurizer {
    pub fn featurize(&self, tokens: &TokenList) -> Result<Features, PipelineError> {
        match self {
            Featurizer::Tfidf { vectorizer } => Ok(Features::Dense(vectorizer.transform(tokens)?.to_dense())),
            Featurizer::AveragedEmbedding { store, .. } => {
                let store = store.as_ref().ok_or(PipelineError::MissingStore)?;
                Ok(Features::Dense(average_embedding(tokens, store)))
            }
            Featurizer::Sequence { vocab, maxlen } => Ok(Features::Sequence(encode_sequence(tokens, vocab, *maxlen)?)),
        }
    }

    /// `(path, sha256)` of the embedding file this featurizer needs.
    pub fn store_reference(&self) -> Option<(&str, &str)> {
        match self {
            Featurizer::AveragedEmbedding { path, sha256, .. } => Some((path, sha256)),
            _ => None,
        }
    }

    /// Attaches a loaded store after checking its hash and dimension.
    pub fn attach_store(&mut self, loaded: Arc<EmbeddingStore>) -> Result<(), PipelineError> {
        if let Featurizer::AveragedEmbedding { sha256, dim, store, .. } = self {
            let actual = loaded.content_hash();
            if actual != *sha256 {
                return Err(PipelineError::StoreMismatch { expected: sha256.clone(), actual });
            }
            if loaded.dim() != *dim {
                return Err(PipelineError::Inconsistent(format!("store dim {} vs recorded {}", loaded.dim(), dim)));
            }
            *store = Some(loaded);
        }
        Ok(())
    }

    fn dense_dim(&self) -> Option<usize> {
        match self {
            Featurizer::Tfidf { vectorizer } => vectorizer.dim().ok(),
            Featurizer::AveragedEmbedding { dim, .. } => Some(*dim),
            Featurizer::Sequence { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedModel {
    Logreg { model: LogRegModel },
    Ovr { model: OvrModel },
    Neural { model: SeqClassifier },
}

impl FittedModel {
    pub fn n_classes(&self) -> usize {
        match self {
            FittedModel::Logreg { model } => model.n_classes(),
            FittedModel::Ovr { model } => model.n_classes(),
            FittedModel::Neural { model } => model.arch().n_classes,
        }
    }

    pub fn predict(&self, features: &Features) -> Result<Prediction, PipelineError> {
        match (self, features) {
            (FittedModel::Logreg { model }, Features::Dense(x)) => {
                let scores = model.scores(x)?;
                Ok(OvrPrediction::from_scores(scores, ProbabilityMapping::Softmax)?.into())
            }
            (FittedModel::Ovr { model }, Features::Dense(x)) => Ok(model.predict(x)?.into()),
            (FittedModel::Neural { model }, Features::Sequence(s)) => {
                let probabilities = model.forward(s)?;
                Ok(Prediction { class: argmax(&probabilities), scores: probabilities.clone(), probabilities })
            }
            _ => Err(PipelineError::Inconsistent("featurizer output does not fit the model".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
    pub scores: Vec<f64>,
}

impl From<OvrPrediction> for Prediction {
    fn from(p: OvrPrediction) -> Self {
        Prediction { class: p.class, probabilities: p.probabilities, scores: p.scores }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pipeline {
    pub task: Task,
    pub preprocess: PreprocessConfig,
    pub featurizer: Featurizer,
    pub model: FittedModel,
}

impl Pipeline {
    pub fn n_classes(&self) -> usize {
        self.model.n_classes()
    }

    pub fn tokens(&self, text: &TaskText<'_>) -> TokenList {
        task_tokens(self.task, text, &self.preprocess)
    }

    pub fn predict_tokens(&self, tokens: &TokenList) -> Result<Prediction, PipelineError> {
        self.model.predict(&self.featurizer.featurize(tokens)?)
    }

    pub fn predict_text(&self, text: &TaskText<'_>) -> Result<Prediction, PipelineError> {
        self.predict_tokens(&self.tokens(text))
    }

    pub fn predict_many(&self, docs: &[TokenList]) -> Result<Vec<Prediction>, PipelineError> {
        docs.par_iter().map(|d| self.predict_tokens(d)).collect()
    }

    /// Shape agreement between featurizer and model.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Inconsistent(m));
        match (&self.featurizer, &self.model) {
            (Featurizer::Sequence { vocab, maxlen }, FittedModel::Neural { model }) => {
                if model.vocab_size() != vocab.sequence_size() {
                    return bad(format!("model has {} embedding rows, vocabulary needs {}", model.vocab_size(), vocab.sequence_size()));
                }
                if model.arch().maxlen != *maxlen {
                    return bad(format!("model maxlen {} vs featurizer {}", model.arch().maxlen, maxlen));
                }
                if model.arch().head != task_head(self.task) {
                    return bad(format!("{:?} head does not serve the {} task", model.arch().head, self.task));
                }
                if !model.is_finite() {
                    return bad("non-finite network parameters".into());
                }
            }
            (f, FittedModel::Logreg { model }) => {
                if let Featurizer::Tfidf { vectorizer } = f {
                    vectorizer.check()?;
                }
                let want = f.dense_dim().ok_or_else(|| PipelineError::Inconsistent("sequence features for a dense model".into()))?;
                if model.dim() != want || model.bias.len() != model.weights.rows() {
                    return bad(format!("logistic model dim {} vs features {}", model.dim(), want));
                }
            }
            (f, FittedModel::Ovr { model }) => {
                if let Featurizer::Tfidf { vectorizer } = f {
                    vectorizer.check()?;
                }
                let want = f.dense_dim().ok_or_else(|| PipelineError::Inconsistent("sequence features for a dense model".into()))?;
                if model.models.iter().any(|m| m.dim() != want) {
                    return bad(format!("one-vs-rest model dim {} vs features {}", model.dim(), want));
                }
            }
            (_, FittedModel::Neural { .. }) => return bad("network needs sequence features".into()),
        }
        if self.n_classes() < 2 {
            return bad("fewer than 2 classes".into());
        }
        Ok(())
    }
}

/// What model selection picked while fitting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub chosen: Option<GridPoint>,
    pub grid: Option<GridResult>,
    pub history: Option<History>,
}

pub struct FitRequest<'a> {
    pub task: Task,
    pub n_classes: usize,
    pub family: ModelFamily,
    pub representation: Representation,
    pub settings: &'a TrainSettings,
    pub seed: u64,
    pub store: Option<&'a StoreRef>,
}

fn rows_of(features: Vec<Features>) -> Result<Matrix, PipelineError> {
    let rows: Vec<Vec<f64>> = features
        .into_iter()
        .map(|f| match f {
            Features::Dense(v) => Ok(v),
            Features::Sequence(_) => Err(PipelineError::Inconsistent("expected dense features".into())),
        })
        .collect::<Result<_, _>>()?;
    Ok(Matrix::from_rows(&rows)?)
}

fn select_rows(x: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), x.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(x.row(i));
    }
    out
}

/// Fits featurizer and model on preprocessed training documents.
///
/// Classical families run a grid search on an inner stratified split, then
/// retrain the winner on all documents. Neural families train on the inner
/// split and keep the epoch with the best held-out loss.
pub fn fit_pipeline(
    req: &FitRequest<'_>,
    preprocess: &PreprocessConfig,
    docs: &[TokenList],
    labels: &[usize],
) -> Result<(Pipeline, FitInfo), PipelineError> {
    if docs.len() != labels.len() {
        return Err(PipelineError::LengthMismatch(docs.len(), labels.len()));
    }
    let s = req.settings;
    let (inner_train, inner_valid) =
        stratified_indices(labels, s.valid_fraction, RngState::derive_seed(req.seed, 1))?;

    let featurizer = match (req.family.is_neural(), req.representation) {
        (true, _) => Featurizer::Sequence { vocab: fit_vocab(docs, 1)?, maxlen: s.neural.maxlen },
        (false, Representation::Tfidf) => {
            let mut v = TfidfVectorizer::new(s.tfidf);
            v.fit(docs)?;
            Featurizer::Tfidf { vectorizer: v }
        }
        (false, Representation::Word2vec) => {
            let r = req.store.ok_or(PipelineError::MissingStore)?;
            Featurizer::AveragedEmbedding {
                path: r.path.clone(),
                sha256: r.store.content_hash(),
                dim: r.store.dim(),
                store: Some(r.store.clone()),
            }
        }
    };
    let feats: Vec<Features> = docs.par_iter().map(|d| featurizer.featurize(d)).collect::<Result<_, _>>()?;

    let mut info = FitInfo::default();
    let model = if req.family.is_neural() {
        let Featurizer::Sequence { vocab, .. } = &featurizer else { unreachable!("neural families use sequences") };
        let n = &s.neural;
        let store = match req.representation {
            Representation::Word2vec => Some(req.store.ok_or(PipelineError::MissingStore)?),
            Representation::Tfidf => None,
        };
        let arch = ArchSpec {
            maxlen: n.maxlen,
            embed_dim: store.map_or(n.embed_dim, |r| r.store.dim()),
            lstm_units: if req.family == ModelFamily::Bilstm { n.bilstm_units } else { n.lstm_units },
            bidirectional: req.family == ModelFamily::Bilstm,
            dense_units: n.dense_units,
            head: task_head(req.task),
            n_classes: req.n_classes,
            embedding_init: if store.is_some() { EmbeddingInit::Store } else { EmbeddingInit::Random },
        };
        let init = init_model(arch, RngState::derive_seed(req.seed, 2), store.map(|r| &*r.store), vocab)?;
        let seqs: Vec<IndexSequence> = feats
            .into_iter()
            .map(|f| match f {
                Features::Sequence(q) => q,
                Features::Dense(_) => unreachable!("sequence featurizer"),
            })
            .collect();
        let pick = |idx: &[usize]| -> (Vec<IndexSequence>, Vec<Target>) {
            (idx.iter().map(|&i| seqs[i].clone()).collect(), idx.iter().map(|&i| Target::Class(labels[i])).collect())
        };
        let (tx, ty) = pick(&inner_train);
        let (vx, vy) = pick(&inner_valid);
        let cfg = TrainConfig { seed: RngState::derive_seed(req.seed, 3), ..n.train };
        let valid = if vx.is_empty() { None } else { Some((&vx[..], &vy[..])) };
        let (model, history) = neural::train(init, (&tx, &ty), valid, &cfg)?;
        info.history = Some(history);
        FittedModel::Neural { model }
    } else {
        let x = rows_of(feats)?;
        let grid: Vec<GridPoint> = match req.family {
            ModelFamily::Svm => s.svm_grid.iter().map(|&k| GridPoint::Svm(k)).collect(),
            _ => s.lr_grid.iter().map(|&l2| GridPoint::Logreg { l2 }).collect(),
        };
        if grid.is_empty() {
            return Err(PipelineError::EmptyGrid);
        }
        let base = ClassicalBase { logreg: s.logreg, smo: s.smo };
        let grid_seed = RngState::derive_seed(req.seed, 4);
        let best = if grid.len() == 1 {
            0
        } else {
            let xt = select_rows(&x, &inner_train);
            let yt: Vec<usize> = inner_train.iter().map(|&i| labels[i]).collect();
            let xv = select_rows(&x, &inner_valid);
            let yv: Vec<usize> = inner_valid.iter().map(|&i| labels[i]).collect();
            let result = grid_search(&grid, (&xt, &yt), (&xv, &yv), req.n_classes, &base, grid_seed)?;
            let b = result.best;
            info.grid = Some(result);
            b
        };
        info.chosen = Some(grid[best]);
        train_point(&grid[best], &x, labels, req.n_classes, &base, RngState::derive_seed(grid_seed, best as u64))?
    };
    let pipeline = Pipeline { task: req.task, preprocess: preprocess.clone(), featurizer, model };
    pipeline.validate()?;
    Ok((pipeline, info))
}

/// Solver settings shared by every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBase {
    pub logreg: LogRegConfig,
    pub smo: SmoConfig,
}
