use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion, macro_metrics, ConfusionMatrix, EvalError, GridPoint, MetricsReport};
use crate::artext::{default_diacritics, parse_stoplist, read_stoplist, PreprocessConfig, TokenList, DEFAULT_STOPWORDS};
use crate::corpus::{stratified_indices, CaseSet, CaseType, Task};
use crate::pipeline::{fit_pipeline, row_name, FitRequest, ModelFamily, Representation, StoreRef, TaskText, TrainSettings};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serializable preprocessing options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSettings {
    pub strip_diacritics: bool,
    pub remove_dates: bool,
    pub fold_alef: bool,
    pub stem: bool,
    /// Stop-word file; the bundled list when absent.
    pub stoplist: Option<PathBuf>,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        PreprocessSettings { strip_diacritics: true, remove_dates: true, fold_alef: false, stem: false, stoplist: None }
    }
}

impl PreprocessSettings {
    pub fn build(&self) -> Result<PreprocessConfig, EvalError> {
        let stoplist: BTreeSet<String> = match &self.stoplist {
            Some(p) => read_stoplist(p)?,
            None => parse_stoplist(DEFAULT_STOPWORDS),
        };
        Ok(PreprocessConfig::new(
            stoplist,
            self.strip_diacritics,
            self.remove_dates,
            default_diacritics(),
            self.fold_alef,
            self.stem,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub case_type: CaseType,
    pub models: Vec<ModelFamily>,
    pub representations: Vec<Representation>,
    pub test_fraction: f64,
    pub seed: u64,
    /// Word-vector file for the Word2Vec rows.
    pub embeddings: Option<PathBuf>,
    pub preprocess: PreprocessSettings,
    pub train: TrainSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Judgment,
            case_type: CaseType::Custody,
            models: ModelFamily::ALL.to_vec(),
            representations: Representation::ALL.to_vec(),
            test_fraction: 0.25,
            seed: 42,
            embeddings: None,
            preprocess: PreprocessSettings::default(),
            train: TrainSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Requested `(model, representation)` pairs in report order.
    pub fn rows(&self) -> Vec<(ModelFamily, Representation)> {
        let mut out = Vec::new();
        for f in ModelFamily::ALL.into_iter().filter(|f| self.models.contains(f)) {
            for r in Representation::ALL.into_iter().filter(|r| self.representations.contains(r)) {
                out.push((f, r));
            }
        }
        out
    }

    pub fn needs_embeddings(&self) -> bool {
        self.representations.contains(&Representation::Word2vec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n_cases: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub model: ModelFamily,
    pub representation: Representation,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub chosen: Option<GridPoint>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub toolkit_version: String,
    pub config: ExperimentConfig,
    pub embeddings_sha256: Option<String>,
    pub data: DataSummary,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTiming {
    pub name: String,
    pub seconds: f64,
}

/// Wall-clock timings, kept apart from the report so the report stays
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub rows: Vec<RowTiming>,
    pub total_seconds: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned plain-text table with P, R, F1 and accuracy in percent.
    pub fn render_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max("Model".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}", "Model", "P(%)", "R(%)", "F1(%)", "Acc(%)");
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}",
                r.name, m.precision, m.recall, m.f1, m.accuracy
            );
        }
        out
    }
}

/// Preprocess, split, fit and test every requested row.
///
/// Rows are fitted in parallel; each derives its seed from the row's
/// position, so the report does not depend on scheduling.
pub fn run_experiment(
    config: &ExperimentConfig,
    cases: &CaseSet,
    store: Option<&StoreRef>,
) -> Result<(ExperimentReport, Timings), EvalError> {
    let started = Instant::now();
    if cases.case_type() != config.case_type {
        return Err(EvalError::Config(format!(
            "config is for {} cases, data holds {}",
            config.case_type,
            cases.case_type()
        )));
    }
    let rows = config.rows();
    if rows.is_empty() {
        return Err(EvalError::Config("no model/representation rows requested".into()));
    }
    if config.needs_embeddings() && store.is_none() {
        return Err(EvalError::MissingEmbeddings);
    }
    cases.validate_for(config.task)?;
    let preprocess = config.preprocess.build()?;
    let catalog = cases.catalog(config.task);
    let n_classes = catalog.len();
    let labels = cases.labels(config.task);
    let docs: Vec<TokenList> = cases
        .cases
        .par_iter()
        .map(|c| crate::pipeline::task_tokens(config.task, &TaskText::from(c), &preprocess))
        .collect();
    let (train_idx, test_idx) = stratified_indices(&labels, config.test_fraction, config.seed)?;
    if test_idx.is_empty() {
        return Err(EvalError::Config("test split is empty".into()));
    }
    let train_docs: Vec<TokenList> = train_idx.iter().map(|&i| docs[i].clone()).collect();
    let train_y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let test_docs: Vec<TokenList> = test_idx.iter().map(|&i| docs[i].clone()).collect();
    let test_y: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();

    let results = rows
        .par_iter()
        .enumerate()
        .map(|(k, &(model, representation))| {
            let t0 = Instant::now();
            let name = row_name(model, representation);
            let req = FitRequest {
                task: config.task,
                n_classes,
                family: model,
                representation,
                settings: &config.train,
                seed: crate::numkit::RngState::derive_seed(config.seed, 100 + k as u64),
                store,
            };
            let (pipeline, info) = fit_pipeline(&req, &preprocess, &train_docs, &train_y)?;
            let preds: Vec<usize> = pipeline.predict_many(&test_docs)?.into_iter().map(|p| p.class).collect();
            let cm = confusion(&test_y, &preds, n_classes)?;
            let metrics = macro_metrics(&cm)?;
            log::info!("{name}: acc {:.2}%", metrics.accuracy);
            let row = ReportRow {
                name: name.clone(),
                model,
                representation,
                metrics,
                confusion: cm,
                chosen: info.chosen,
                best_epoch: info.history.and_then(|h| h.best_epoch),
            };
            Ok((row, RowTiming { name, seconds: t0.elapsed().as_secs_f64() }))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let (report_rows, timing_rows): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let report = ExperimentReport {
        toolkit_version: TOOLKIT_VERSION.to_owned(),
        config: config.clone(),
        embeddings_sha256: store.filter(|_| config.needs_embeddings()).map(|s| s.store.content_hash()),
        data: DataSummary {
            n_cases: cases.len(),
            n_train: train_idx.len(),
            n_test: test_idx.len(),
            classes: catalog.classes().iter().map(|c| c.name.clone()).collect(),
        },
        rows: report_rows,
    };
    Ok((report, Timings { rows: timing_rows, total_seconds: started.elapsed().as_secs_f64() }))
}
