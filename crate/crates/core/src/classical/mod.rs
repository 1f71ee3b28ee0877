//! Classical learners: multinomial logistic regression and kernel SVM
//! trained with SMO, lifted to multiclass by one-vs-rest.

mod logreg;
mod ovr;
mod svm;

pub use logreg::{train_logreg, LogRegConfig, LogRegModel};
pub use ovr::{ovr_train, BinaryFamily, BinaryModel, OvrModel, OvrPrediction, ProbabilityMapping};
pub use svm::{smo_train_binary, KernelKind, KernelSpec, SmoConfig, SvmBinaryModel};

use thiserror::Error;

use crate::numkit::NumError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("training data has a single class; need at least two")]
    SingleClass,
    #[error("class {0} has no training examples")]
    AbsentClass(usize),
    #[error("dimension mismatch: model expects {expected}, input has {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("{0} rows but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("binary labels must be -1 or +1, found {0}")]
    BadBinaryLabel(f64),
    #[error("invalid hyperparameter: {0}")]
    Hyper(String),
    #[error("need at least {0} training rows")]
    TooFewRows(usize),
    #[error(transparent)]
    Num(#[from] NumError),
}

fn check_labels(n_rows: usize, y: &[usize], n_classes: usize) -> Result<(), ClassicalError> {
    if n_rows != y.len() {
        return Err(ClassicalError::LengthMismatch(n_rows, y.len()));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(ClassicalError::LabelOutOfRange { label, n_classes });
    }
    let first = y.first().copied();
    if y.iter().all(|&l| Some(l) == first) {
        return Err(ClassicalError::SingleClass);
    }
    Ok(())
}
