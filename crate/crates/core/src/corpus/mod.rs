//! Case records, label catalogs, stratified splitting and the synthetic
//! case generator.

mod catalog;
mod split;
mod synth;

pub use catalog::{CaseCatalogs, CatalogFile, ClassName, LabelCatalog, DEFAULT_CATALOGS};
pub use split::{split_stratified, stratified_indices, SplitPair};
pub use synth::{generate_synthetic, synthetic_embeddings, SynthSpec};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("record {id}: unknown {field} label {label:?}")]
    UnknownLabel { id: String, field: &'static str, label: String },
    #[error("record {id}: case_type {found} does not match catalog case_type {expected}")]
    CaseTypeMismatch { id: String, expected: CaseType, found: CaseType },
    #[error("record {id}: duplicate id")]
    DuplicateId { id: String },
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("no catalog for task {task} and case_type {case_type}")]
    MissingCatalog { task: Task, case_type: CaseType },
    #[error("test fraction {0} outside [0, 1)")]
    BadFraction(f64),
    #[error("class {class} has only {count} member(s); stratified split needs at least 2")]
    ClassTooSmall { class: usize, count: usize },
    #[error("invalid synthetic spec: {0}")]
    Synth(String),
    #[error("record {id}: required {field} text is empty for task {task}")]
    EmptyField { id: String, field: &'static str, task: Task },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseType {
    Custody,
    Annulment,
}

impl fmt::Display for CaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseType::Custody => "custody",
            CaseType::Annulment => "annulment",
        })
    }
}

impl FromStr for CaseType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "custody" => Ok(CaseType::Custody),
            "annulment" => Ok(CaseType::Annulment),
            other => Err(format!("unknown case type {other:?} (expected custody|annulment)")),
        }
    }
}

/// Prediction task.
///
/// `Judgment` and `Evidence` read the pleading; `Probability` reads claim and
/// answer and reports a probability per judgment outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Judgment,
    Evidence,
    Probability,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Judgment => "judgment",
            Task::Evidence => "evidence",
            Task::Probability => "probability",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "judgment" => Ok(Task::Judgment),
            "evidence" => Ok(Task::Evidence),
            "probability" => Ok(Task::Probability),
            other => Err(format!("unknown task {other:?} (expected judgment|evidence|probability)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ministry,
    Simulated,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub id: String,
    pub case_type: CaseType,
    pub claim: String,
    pub answer: String,
    pub pleading: String,
    pub judgment: usize,
    pub evidence: usize,
    pub provenance: Option<Provenance>,
}

impl Case {
    /// Label of this case for `task`.
    pub fn label(&self, task: Task) -> usize {
        match task {
            Task::Judgment | Task::Probability => self.judgment,
            Task::Evidence => self.evidence,
        }
    }
}

/// On-disk form of a case: one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub id: String,
    pub case_type: CaseType,
    pub claim: String,
    pub answer: String,
    pub pleading: String,
    pub judgment: String,
    pub evidence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Provenance>,
}

/// Cases of a single case type together with their catalogs.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSet {
    pub catalogs: CaseCatalogs,
    pub cases: Vec<Case>,
}

impl CaseSet {
    pub fn new(catalogs: CaseCatalogs, cases: Vec<Case>) -> Self {
        CaseSet { catalogs, cases }
    }

    pub fn case_type(&self) -> CaseType {
        self.catalogs.case_type()
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn catalog(&self, task: Task) -> &LabelCatalog {
        self.catalogs.for_task(task)
    }

    pub fn labels(&self, task: Task) -> Vec<usize> {
        self.cases.iter().map(|c| c.label(task)).collect()
    }

    /// Number of cases per provenance; cases without one are not counted.
    pub fn provenance_counts(&self) -> BTreeMap<Provenance, usize> {
        let mut out = BTreeMap::new();
        for p in self.cases.iter().filter_map(|c| c.provenance) {
            *out.entry(p).or_default() += 1;
        }
        out
    }

    /// Checks that every case carries the text `task` reads.
    pub fn validate_for(&self, task: Task) -> Result<(), CorpusError> {
        for c in &self.cases {
            let required: &[(&'static str, &str)] = match task {
                Task::Judgment | Task::Evidence => &[("pleading", &c.pleading)],
                Task::Probability => &[("claim", &c.claim), ("answer", &c.answer)],
            };
            for (field, text) in required {
                if text.trim().is_empty() {
                    return Err(CorpusError::EmptyField { id: c.id.clone(), field, task });
                }
            }
        }
        Ok(())
    }

    pub fn to_record(&self, case: &Case) -> CaseRecord {
        CaseRecord {
            id: case.id.clone(),
            case_type: case.case_type,
            claim: case.claim.clone(),
            answer: case.answer.clone(),
            pleading: case.pleading.clone(),
            judgment: self.catalogs.judgment.name(case.judgment).to_owned(),
            evidence: self.catalogs.evidence.name(case.evidence).to_owned(),
            source: case.provenance,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in &self.cases {
            serde_json::to_writer(&mut w, &self.to_record(c))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |source| CorpusError::Io { path: path.display().to_string(), source };
        let f = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    /// Keeps the cases at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> CaseSet {
        CaseSet { catalogs: self.catalogs.clone(), cases: indices.iter().map(|&i| self.cases[i].clone()).collect() }
    }
}

/// Parses line-delimited case records, resolving label names against `catalogs`.
pub fn parse_cases<R: BufRead>(reader: R, catalogs: &CaseCatalogs) -> Result<CaseSet, CorpusError> {
    let mut cases = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CaseRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        if rec.case_type != catalogs.case_type() {
            return Err(CorpusError::CaseTypeMismatch { id: rec.id, expected: catalogs.case_type(), found: rec.case_type });
        }
        let judgment = catalogs.judgment.index_of(&rec.judgment).ok_or_else(|| CorpusError::UnknownLabel {
            id: rec.id.clone(),
            field: "judgment",
            label: rec.judgment.clone(),
        })?;
        let evidence = catalogs.evidence.index_of(&rec.evidence).ok_or_else(|| CorpusError::UnknownLabel {
            id: rec.id.clone(),
            field: "evidence",
            label: rec.evidence.clone(),
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId { id: rec.id });
        }
        cases.push(Case {
            id: rec.id,
            case_type: rec.case_type,
            claim: rec.claim,
            answer: rec.answer,
            pleading: rec.pleading,
            judgment,
            evidence,
            provenance: rec.source,
        });
    }
    Ok(CaseSet::new(catalogs.clone(), cases))
}

pub fn load_cases(path: &Path, catalogs: &CaseCatalogs) -> Result<CaseSet, CorpusError> {
    let f = std::fs::File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_cases(std::io::BufReader::new(f), catalogs)
}
