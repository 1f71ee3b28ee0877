use serde::{Deserialize, Serialize};

use super::EvalError;

/// `K × K` counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(EvalError::NotSquare);
        }
        Ok(ConfusionMatrix { n_classes: k, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if let Some(&label) = [t, p].iter().find(|&&l| l >= n_classes) {
            return Err(EvalError::LabelOutOfRange { label, n_classes });
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Macro-averaged scores, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: f64, den: f64, what: &str, class: usize) -> f64 {
    if den == 0.0 {
        log::warn!("{what} of class {class} is undefined (zero denominator); using 0");
        0.0
    } else {
        num / den
    }
}

/// Per-class precision, recall and F1 (zero when undefined), averaged
/// without weighting. Per-class values are fractions, the macro values
/// and accuracy are percentages.
pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 || cm.n_classes == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.n_classes;
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let predicted: u64 = (0..k).map(|t| cm.counts[t][c]).sum();
            let support: u64 = cm.counts[c].iter().sum();
            let precision = ratio(tp, predicted as f64, "precision", c);
            let recall = ratio(tp, support as f64, "recall", c);
            let f1 = ratio(2.0 * precision * recall, precision + recall, "F1", c);
            ClassMetrics { precision, recall, f1, support }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| 100.0 * per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        accuracy: 100.0 * cm.trace() as f64 / total as f64,
        per_class,
    })
}
