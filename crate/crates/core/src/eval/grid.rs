use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::classical::{ovr_train, train_logreg, BinaryFamily, KernelSpec, LogRegConfig, SmoConfig};
use crate::numkit::{Matrix, RngState};
use crate::pipeline::{ClassicalBase, FittedModel, Prediction};

/// One hyperparameter assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GridPoint {
    Svm(KernelSpec),
    Logreg { l2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub point: GridPoint,
    pub valid_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Index of the winner in grid order.
    pub best: usize,
    pub scores: Vec<GridScore>,
}

/// Trains the classical model described by `point`.
pub fn train_point(
    point: &GridPoint,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    base: &ClassicalBase,
    seed: u64,
) -> Result<FittedModel, EvalError> {
    Ok(match *point {
        GridPoint::Svm(kernel) => {
            let smo = SmoConfig { seed, ..base.smo };
            FittedModel::Ovr { model: ovr_train(x, y, n_classes, &BinaryFamily::Svm { kernel, smo })? }
        }
        GridPoint::Logreg { l2 } => {
            let cfg = LogRegConfig { l2, seed, ..base.logreg };
            FittedModel::Logreg { model: train_logreg(x, y, n_classes, &cfg)? }
        }
    })
}

fn accuracy(model: &FittedModel, x: &Matrix, y: &[usize]) -> Result<f64, EvalError> {
    let mut hits = 0usize;
    for (i, &label) in y.iter().enumerate() {
        let p: Prediction = model.predict(&crate::pipeline::Features::Dense(x.row(i).to_vec()))?;
        hits += usize::from(p.class == label);
    }
    Ok(hits as f64 / y.len() as f64)
}

/// Trains every grid point on `train` and scores it on `valid`.
///
/// Point `i` uses the seed `derive_seed(seed, i)`. The winner has the highest
/// validation accuracy; ties go to the earliest point in grid order.
pub fn grid_search(
    grid: &[GridPoint],
    train: (&Matrix, &[usize]),
    valid: (&Matrix, &[usize]),
    n_classes: usize,
    base: &ClassicalBase,
    seed: u64,
) -> Result<GridResult, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if valid.1.is_empty() {
        return Err(EvalError::EmptyValidation);
    }
    let scores = grid
        .par_iter()
        .enumerate()
        .map(|(i, point)| {
            let model = train_point(point, train.0, train.1, n_classes, base, RngState::derive_seed(seed, i as u64))?;
            Ok(GridScore { point: *point, valid_accuracy: accuracy(&model, valid.0, valid.1)? })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.valid_accuracy > scores[best].valid_accuracy {
            best = i;
        }
    }
    Ok(GridResult { best, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<usize>) {
        // imbalanced, so a near-zero C collapses to the majority class
        let y: Vec<usize> = (0..16).map(|i| usize::from(i % 4 == 3)).collect();
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                let side = if y[i] == 1 { 1.0 } else { -1.0 };
                vec![side * (1.0 + i as f64 / 16.0), 0.3 * ((i % 3) as f64 - 1.0)]
            })
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn base() -> ClassicalBase {
        ClassicalBase { logreg: LogRegConfig::default(), smo: SmoConfig::default() }
    }

    #[test]
    fn singleton_and_empty() {
        let (x, y) = toy();
        let g = [GridPoint::Logreg { l2: 0.01 }];
        let r = grid_search(&g, (&x, &y), (&x, &y), 2, &base(), 1).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(grid_search(&[], (&x, &y), (&x, &y), 2, &base(), 1), Err(EvalError::EmptyGrid));
    }

    #[test]
    fn underfitting_point_loses() {
        let (x, y) = toy();
        let g = [GridPoint::Svm(KernelSpec::linear(1e-6)), GridPoint::Svm(KernelSpec::linear(10.0))];
        let r = grid_search(&g, (&x, &y), (&x, &y), 2, &base(), 3).unwrap();
        assert_eq!(r.best, 1);
        assert_eq!(r.scores[1].valid_accuracy, 1.0);
        assert!(r.scores.iter().all(|s| s.valid_accuracy <= r.scores[r.best].valid_accuracy));
    }

    #[test]
    fn ties_go_to_first() {
        let (x, y) = toy();
        let g = [GridPoint::Svm(KernelSpec::linear(10.0)), GridPoint::Svm(KernelSpec::linear(100.0))];
        let r = grid_search(&g, (&x, &y), (&x, &y), 2, &base(), 3).unwrap();
        assert_eq!(r.scores[0].valid_accuracy, r.scores[1].valid_accuracy);
        assert_eq!(r.best, 0);
    }
}
