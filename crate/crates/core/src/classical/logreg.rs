use serde::{Deserialize, Serialize};

use super::{check_labels, ClassicalError};
use crate::numkit::{log_sum_exp, softmax_in_place, Matrix, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { lr: 0.1, epochs: 200, l2: 1e-3, batch_size: 16, seed: 42 }
    }
}

/// Softmax regression: `K × D` weights and `K` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2: f64,
}

impl LogRegModel {
    pub fn zeros(n_classes: usize, dim: usize, l2: f64) -> Self {
        LogRegModel { weights: Matrix::zeros(n_classes, dim), bias: vec![0.0; n_classes], l2 }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ClassicalError> {
        if x.len() != self.dim() {
            return Err(ClassicalError::Dimension { expected: self.dim(), actual: x.len() });
        }
        Ok(())
    }

    /// Raw class scores `Wx + b`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, ClassicalError> {
        self.check_dim(x)?;
        let mut z = self.bias.clone();
        self.weights.gemv_acc(x, &mut z);
        Ok(z)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ClassicalError> {
        let mut z = self.scores(x)?;
        softmax_in_place(&mut z)?;
        Ok(z)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, ClassicalError> {
        Ok(crate::numkit::argmax(&self.scores(x)?))
    }

    /// Parameters as one vector: weights row-major, then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.weights.as_slice().to_vec();
        v.extend_from_slice(&self.bias);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.weights.as_slice().len();
        self.weights.as_mut_slice().copy_from_slice(&flat[..n]);
        self.bias.copy_from_slice(&flat[n..]);
    }

    /// Mean cross-entropy over `rows` plus `(l2/2)·‖W‖²`, and its gradient
    /// in [`to_flat`](Self::to_flat) layout.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[usize], rows: &[usize]) -> (f64, Vec<f64>) {
        let k = self.n_classes();
        let d = self.dim();
        let mut grad = vec![0.0; k * d + k];
        let mut loss = 0.0;
        let inv = 1.0 / rows.len().max(1) as f64;
        let mut z = vec![0.0; k];
        for &r in rows {
            let xr = x.row(r);
            z.copy_from_slice(&self.bias);
            self.weights.gemv_acc(xr, &mut z);
            loss += log_sum_exp(&z) - z[y[r]];
            softmax_in_place(&mut z).expect("finite scores");
            z[y[r]] -= 1.0;
            for (c, dz) in z.iter().enumerate() {
                let g = dz * inv;
                if g != 0.0 {
                    for (gw, xv) in grad[c * d..(c + 1) * d].iter_mut().zip(xr) {
                        *gw += g * xv;
                    }
                }
                grad[k * d + c] += g;
            }
        }
        loss *= inv;
        let w = self.weights.as_slice();
        loss += 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        for (g, wv) in grad[..k * d].iter_mut().zip(w) {
            *g += self.l2 * wv;
        }
        (loss, grad)
    }

    pub fn training_loss(&self, x: &Matrix, y: &[usize]) -> f64 {
        let rows: Vec<usize> = (0..x.rows()).collect();
        self.loss_and_grad(x, y, &rows).0
    }
}

/// Seeded mini-batch gradient descent from zero weights.
///
/// The full training loss is evaluated after every epoch and the best
/// parameters seen (including the starting point) are returned, so the final
/// loss never exceeds the initial one.
pub fn train_logreg(x: &Matrix, y: &[usize], n_classes: usize, cfg: &LogRegConfig) -> Result<LogRegModel, ClassicalError> {
    check_labels(x.rows(), y, n_classes)?;
    if cfg.lr.is_nan() || cfg.lr < 0.0 || cfg.l2.is_nan() || cfg.l2 < 0.0 || cfg.batch_size == 0 {
        return Err(ClassicalError::Hyper(format!("lr {} l2 {} batch {}", cfg.lr, cfg.l2, cfg.batch_size)));
    }
    let mut model = LogRegModel::zeros(n_classes, x.cols(), cfg.l2);
    let mut best = model.clone();
    let mut best_loss = model.training_loss(x, y);
    let mut rng = RngState::new(cfg.seed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut params = model.to_flat();

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let (_, g) = model.loss_and_grad(x, y, batch);
            for (p, gi) in params.iter_mut().zip(&g) {
                *p -= cfg.lr * gi;
            }
            model.set_flat(&params);
        }
        let loss = model.training_loss(x, y);
        if !loss.is_finite() {
            break;
        }
        if loss < best_loss {
            best_loss = loss;
            best = model.clone();
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{finite_diff_check, GradCheckOptions};

    fn separable(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = RngState::new(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let cx = if c == 0 { -2.0 } else { 2.0 };
            rows.push(vec![cx + rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)]);
            y.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_toy_fits() {
        let (x, y) = separable(20, 1);
        let m = train_logreg(&x, &y, 2, &LogRegConfig::default()).unwrap();
        let acc = (0..20).filter(|&i| m.predict(x.row(i)).unwrap() == y[i]).count();
        assert_eq!(acc, 20);
        assert!(m.training_loss(&x, &y) <= LogRegModel::zeros(2, 2, 1e-3).training_loss(&x, &y));
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let (x, y) = separable(10, 2);
        let cfg = LogRegConfig { epochs: 0, ..Default::default() };
        let m = train_logreg(&x, &y, 4, &cfg).unwrap();
        assert_eq!(m.predict_proba(&[3.0, -1.0]).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn errors() {
        let (x, _) = separable(4, 3);
        assert_eq!(train_logreg(&x, &[1, 1, 1, 1], 2, &LogRegConfig::default()), Err(ClassicalError::SingleClass));
        assert!(matches!(train_logreg(&x, &[0, 1], 2, &LogRegConfig::default()), Err(ClassicalError::LengthMismatch(4, 2))));
        let m = LogRegModel::zeros(3, 2, 0.0);
        assert!(matches!(m.predict_proba(&[1.0]), Err(ClassicalError::Dimension { expected: 2, actual: 1 })));
    }

    #[test]
    fn probabilities_and_argmax() {
        let mut rng = RngState::new(4);
        let mut m = LogRegModel::zeros(4, 5, 0.0);
        let flat: Vec<f64> = (0..24).map(|_| rng.uniform(-2.0, 2.0)).collect();
        m.set_flat(&flat);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let p = m.predict_proba(&x).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(crate::numkit::argmax(&p), crate::numkit::argmax(&m.scores(&x).unwrap()));
        }
    }

    #[test]
    fn deterministic() {
        let (x, y) = separable(30, 5);
        let a = train_logreg(&x, &y, 2, &LogRegConfig::default()).unwrap();
        let b = train_logreg(&x, &y, 2, &LogRegConfig::default()).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngState::new(6);
        for trial in 0..5 {
            let (n, d, k) = (8, 4, 3);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let y: Vec<usize> = (0..n).map(|i| i % k).collect();
            let mut m = LogRegModel::zeros(k, d, 0.05);
            let flat: Vec<f64> = (0..k * d + k).map(|_| rng.uniform(-1.0, 1.0)).collect();
            m.set_flat(&flat);
            let all: Vec<usize> = (0..n).collect();
            let (_, g) = m.loss_and_grad(&x, &y, &all);
            let mut probe = m.clone();
            let r = finite_diff_check(
                |p| {
                    probe.set_flat(p);
                    probe.loss_and_grad(&x, &y, &all).0
                },
                &flat,
                &g,
                &[],
                &GradCheckOptions { tolerance: 1e-6, ..Default::default() },
            )
            .unwrap();
            assert!(r.passed, "trial {trial}: {r:?}");
        }
    }
}
