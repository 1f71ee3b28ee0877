use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CaseType, CorpusError, Task};

/// Built-in catalog file. Annulment judgment classes default to the
/// {with compensation, without compensation, deny, other} set; the
/// `"table"` variant swaps "other" for plain annulment.
pub const DEFAULT_CATALOGS: &str = include_str!("../../data/catalogs.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassName {
    /// Arabic class name; this is the label string used in case records.
    pub name: String,
    /// English gloss.
    pub gloss: String,
}

/// Ordered class list for one (task, case type).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog", into = "RawCatalog")]
pub struct LabelCatalog {
    task: Task,
    case_type: CaseType,
    variant: Option<String>,
    classes: Vec<ClassName>,
}

#[derive(Serialize, Deserialize)]
struct RawCatalog {
    task: Task,
    case_type: CaseType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variant: Option<String>,
    classes: Vec<ClassName>,
}

impl TryFrom<RawCatalog> for LabelCatalog {
    type Error = CorpusError;

    fn try_from(r: RawCatalog) -> Result<Self, Self::Error> {
        let mut c = LabelCatalog::new(r.task, r.case_type, r.classes)?;
        c.variant = r.variant;
        Ok(c)
    }
}

impl From<LabelCatalog> for RawCatalog {
    fn from(c: LabelCatalog) -> Self {
        RawCatalog { task: c.task, case_type: c.case_type, variant: c.variant, classes: c.classes }
    }
}

/// Expected class count for a (task, case type).
pub fn expected_class_count(task: Task, case_type: CaseType) -> usize {
    match (task, case_type) {
        (Task::Judgment | Task::Probability, _) => 4,
        (Task::Evidence, CaseType::Custody) => 8,
        (Task::Evidence, CaseType::Annulment) => 11,
    }
}

impl LabelCatalog {
    pub fn new(task: Task, case_type: CaseType, classes: Vec<ClassName>) -> Result<Self, CorpusError> {
        let want = expected_class_count(task, case_type);
        if classes.len() != want {
            return Err(CorpusError::Catalog(format!(
                "{task}/{case_type} catalog needs {want} classes, got {}",
                classes.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if c.name.trim().is_empty() {
                return Err(CorpusError::Catalog("empty class name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(CorpusError::Catalog(format!("duplicate class name {:?}", c.name)));
            }
        }
        Ok(LabelCatalog { task, case_type, variant: None, classes })
    }

    pub fn builtin(task: Task, case_type: CaseType) -> LabelCatalog {
        CatalogFile::builtin().get(task, case_type, None).expect("built-in catalogs cover every task and case type").clone()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn case_type(&self) -> CaseType {
        self.case_type
    }

    pub fn variant(&self) -> Option<&str> {
        self.variant.as_deref()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ClassName] {
        &self.classes
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let name = name.trim();
        self.classes.iter().position(|c| c.name == name)
    }

    /// Same classes under another task (judgment ↔ probability).
    pub fn retarget(&self, task: Task) -> Result<LabelCatalog, CorpusError> {
        let mut c = LabelCatalog::new(task, self.case_type, self.classes.clone())?;
        c.variant = self.variant.clone();
        Ok(c)
    }
}

/// Catalog file: `{"catalogs": [{"task", "case_type", "variant"?, "classes": [{"name", "gloss"}]}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogFile {
    pub catalogs: Vec<LabelCatalog>,
}

impl CatalogFile {
    pub fn builtin() -> CatalogFile {
        serde_json::from_str(DEFAULT_CATALOGS).expect("built-in catalog file parses")
    }

    pub fn parse(body: &str) -> Result<CatalogFile, CorpusError> {
        serde_json::from_str(body).map_err(|e| CorpusError::Catalog(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<CatalogFile, CorpusError> {
        let body = std::fs::read_to_string(path)
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        Self::parse(&body)
    }

    pub fn get(&self, task: Task, case_type: CaseType, variant: Option<&str>) -> Result<&LabelCatalog, CorpusError> {
        self.catalogs
            .iter()
            .find(|c| c.task == task && c.case_type == case_type && c.variant.as_deref() == variant)
            .ok_or(CorpusError::MissingCatalog { task, case_type })
    }
}

/// The judgment and evidence catalogs a case set is labelled against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCatalogs {
    pub judgment: LabelCatalog,
    pub evidence: LabelCatalog,
}

impl CaseCatalogs {
    pub fn new(judgment: LabelCatalog, evidence: LabelCatalog) -> Result<Self, CorpusError> {
        if judgment.task != Task::Judgment || evidence.task != Task::Evidence {
            return Err(CorpusError::Catalog("expected a judgment and an evidence catalog".into()));
        }
        if judgment.case_type != evidence.case_type {
            return Err(CorpusError::Catalog("judgment and evidence catalogs disagree on case type".into()));
        }
        Ok(CaseCatalogs { judgment, evidence })
    }

    pub fn builtin(case_type: CaseType) -> Self {
        Self::from_file(&CatalogFile::builtin(), case_type, None).expect("built-in catalogs are consistent")
    }

    /// Picks the judgment catalog `variant` (if any) and the evidence catalog.
    pub fn from_file(file: &CatalogFile, case_type: CaseType, variant: Option<&str>) -> Result<Self, CorpusError> {
        let judgment = file.get(Task::Judgment, case_type, variant)?.clone();
        let evidence = file.get(Task::Evidence, case_type, None)?.clone();
        Self::new(judgment, evidence)
    }

    pub fn case_type(&self) -> CaseType {
        self.judgment.case_type
    }

    /// Catalog whose classes `task` predicts. Probability predicts judgment outcomes.
    pub fn for_task(&self, task: Task) -> &LabelCatalog {
        match task {
            Task::Judgment | Task::Probability => &self.judgment,
            Task::Evidence => &self.evidence,
        }
    }
}
