use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_labels, smo_train_binary, train_logreg, ClassicalError, KernelSpec, LogRegConfig, LogRegModel, SmoConfig,
    SvmBinaryModel,
};
use crate::numkit::{argmax, sigmoid, softmax_in_place, Matrix, RngState};

/// Binary learner used for each class-vs-rest problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum BinaryFamily {
    Svm { kernel: KernelSpec, smo: SmoConfig },
    Logreg(LogRegConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum BinaryModel {
    Svm(SvmBinaryModel),
    /// Two-class softmax regression; its score is `z_pos − z_neg`.
    Logreg(LogRegModel),
}

impl BinaryModel {
    pub fn score(&self, x: &[f64]) -> Result<f64, ClassicalError> {
        match self {
            BinaryModel::Svm(m) => m.decision(x),
            BinaryModel::Logreg(m) => {
                let z = m.scores(x)?;
                Ok(z[1] - z[0])
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BinaryModel::Svm(m) => m.dim(),
            BinaryModel::Logreg(m) => m.dim(),
        }
    }
}

/// How per-class scores become probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityMapping {
    /// Independent `sigmoid(score)` per class.
    Sigmoid,
    /// Softmax across class scores.
    Softmax,
}

impl ProbabilityMapping {
    pub fn apply(self, scores: &[f64]) -> Result<Vec<f64>, ClassicalError> {
        match self {
            ProbabilityMapping::Sigmoid => Ok(scores.iter().map(|&s| sigmoid(s)).collect()),
            ProbabilityMapping::Softmax => {
                let mut p = scores.to_vec();
                softmax_in_place(&mut p)?;
                Ok(p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub models: Vec<BinaryModel>,
    pub mapping: ProbabilityMapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrPrediction {
    pub class: usize,
    pub scores: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl OvrPrediction {
    pub fn from_scores(scores: Vec<f64>, mapping: ProbabilityMapping) -> Result<Self, ClassicalError> {
        let probabilities = mapping.apply(&scores)?;
        Ok(OvrPrediction { class: argmax(&scores), scores, probabilities })
    }
}

impl OvrModel {
    pub fn n_classes(&self) -> usize {
        self.models.len()
    }

    pub fn dim(&self) -> usize {
        self.models.first().map_or(0, BinaryModel::dim)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, ClassicalError> {
        self.models.iter().map(|m| m.score(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<OvrPrediction, ClassicalError> {
        OvrPrediction::from_scores(self.scores(x)?, self.mapping)
    }
}

/// Trains one binary model per class. Every class in `0..n_classes` must
/// appear in `y`. Each class derives its own seed from the family's seed.
pub fn ovr_train(x: &Matrix, y: &[usize], n_classes: usize, family: &BinaryFamily) -> Result<OvrModel, ClassicalError> {
    check_labels(x.rows(), y, n_classes)?;
    if let Some(k) = (0..n_classes).find(|k| !y.contains(k)) {
        return Err(ClassicalError::AbsentClass(k));
    }
    let models = (0..n_classes)
        .into_par_iter()
        .map(|k| match family {
            BinaryFamily::Svm { kernel, smo } => {
                let yk: Vec<f64> = y.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
                let cfg = SmoConfig { seed: RngState::derive_seed(smo.seed, k as u64), ..*smo };
                smo_train_binary(x, &yk, kernel, &cfg).map(BinaryModel::Svm)
            }
            BinaryFamily::Logreg(lr) => {
                let yk: Vec<usize> = y.iter().map(|&l| usize::from(l == k)).collect();
                let cfg = LogRegConfig { seed: RngState::derive_seed(lr.seed, k as u64), ..*lr };
                train_logreg(x, &yk, 2, &cfg).map(BinaryModel::Logreg)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mapping = match family {
        BinaryFamily::Svm { .. } => ProbabilityMapping::Sigmoid,
        BinaryFamily::Logreg(_) => ProbabilityMapping::Softmax,
    };
    Ok(OvrModel { models, mapping })
}
