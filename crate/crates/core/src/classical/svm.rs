//! Binary soft-margin SVM solved in the dual with SMO.
//!
//! The solver tracks `F_i = Σ_j α_j y_j K(x_i, x_j) − y_i`, which is the
//! error `f(x_i) − y_i` without the bias. Optimality holds when
//! `max_{I_up} −F ≤ min_{I_low} −F + tol`, where `I_up` holds points whose
//! `y_i α_i` can still grow and `I_low` those where it can shrink; the bias is
//! the midpoint of that interval.
//!
//! Training runs Platt's simplified loop first (every KKT violator paired with
//! a seeded random partner, until `max_passes` quiet passes), then finishes
//! with maximal-violating-pair steps until the optimality gap is within `tol`.

use serde::{Deserialize, Serialize};

use super::ClassicalError;
use crate::numkit::{Matrix, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF width; ignored by the linear kernel.
    pub gamma: f64,
    pub c: f64,
}

impl KernelSpec {
    pub fn linear(c: f64) -> Self {
        KernelSpec { kind: KernelKind::Linear, gamma: 0.0, c }
    }

    pub fn rbf(c: f64, gamma: f64) -> Self {
        KernelSpec { kind: KernelKind::Rbf, gamma, c }
    }

    pub fn validate(&self) -> Result<(), ClassicalError> {
        if !self.c.is_finite() || self.c <= 0.0 {
            return Err(ClassicalError::Hyper(format!("C must be positive, got {}", self.c)));
        }
        if self.kind == KernelKind::Rbf && (!self.gamma.is_finite() || self.gamma <= 0.0) {
            return Err(ClassicalError::Hyper(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => crate::numkit::dot(a, b),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoConfig {
    pub tol: f64,
    pub max_passes: usize,
    pub seed: u64,
    /// Cap on pair updates in the maximal-violating-pair phase.
    pub max_iter: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig { tol: 1e-3, max_passes: 20, seed: 42, max_iter: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmBinaryModel {
    pub kernel: KernelSpec,
    /// Training-row indices of the retained support vectors.
    pub support_indices: Vec<usize>,
    pub support_vectors: Matrix,
    pub alphas: Vec<f64>,
    /// Labels of the support vectors, each −1 or +1.
    pub labels: Vec<f64>,
    pub bias: f64,
    /// Final optimality gap `max_{I_up} −F − min_{I_low} −F`.
    pub gap: f64,
    pub converged: bool,
}

impl SvmBinaryModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.cols()
    }

    /// `f(x) = Σ α_i y_i K(x_i, x) + b`
    pub fn decision(&self, x: &[f64]) -> Result<f64, ClassicalError> {
        if x.len() != self.dim() {
            return Err(ClassicalError::Dimension { expected: self.dim(), actual: x.len() });
        }
        let mut f = self.bias;
        for (k, (a, y)) in self.alphas.iter().zip(&self.labels).enumerate() {
            f += a * y * self.kernel.eval(self.support_vectors.row(k), x);
        }
        Ok(f)
    }

    /// Dual objective `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij`.
    pub fn dual_objective(&self) -> f64 {
        let n = self.alphas.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.labels[i]
                    * self.labels[j]
                    * self.kernel.eval(self.support_vectors.row(i), self.support_vectors.row(j));
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }
}

struct Solver<'a> {
    y: &'a [f64],
    k: Vec<f64>,
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    f: Vec<f64>,
}

impl Solver<'_> {
    #[inline]
    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    fn in_up(&self, i: usize) -> bool {
        (self.y[i] > 0.0 && self.alpha[i] < self.c) || (self.y[i] < 0.0 && self.alpha[i] > 0.0)
    }

    fn in_low(&self, i: usize) -> bool {
        (self.y[i] > 0.0 && self.alpha[i] > 0.0) || (self.y[i] < 0.0 && self.alpha[i] < self.c)
    }

    /// `(i_up, i_low, b_lo, b_hi)`: the maximal violating pair and the bias interval.
    fn extremes(&self) -> (usize, usize, f64, f64) {
        let (mut iu, mut il) = (usize::MAX, usize::MAX);
        let (mut b_lo, mut b_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..self.n {
            let v = -self.f[t];
            if self.in_up(t) && v > b_lo {
                b_lo = v;
                iu = t;
            }
            if self.in_low(t) && v < b_hi {
                b_hi = v;
                il = t;
            }
        }
        (iu, il, b_lo, b_hi)
    }

    fn bias(&self) -> f64 {
        let (_, _, lo, hi) = self.extremes();
        0.5 * (lo + hi)
    }

    fn violates(&self, i: usize, b: f64, tol: f64) -> bool {
        let r = self.y[i] * (self.f[i] + b);
        (r < -tol && self.alpha[i] < self.c) || (r > tol && self.alpha[i] > 0.0)
    }

    fn pair_objective(&self, i: usize, j: usize, ai: f64, aj: f64) -> f64 {
        // dual objective restricted to the pair, other alphas fixed
        let (yi, yj) = (self.y[i], self.y[j]);
        let (dai, daj) = (ai - self.alpha[i], aj - self.alpha[j]);
        // gradient of ½αᵀQα − Σα at current alpha is y_t F_t
        let lin = dai * yi * self.f[i] + daj * yj * self.f[j];
        let quad = 0.5 * (dai * dai * self.kij(i, i) + daj * daj * self.kij(j, j)) + dai * daj * yi * yj * self.kij(i, j);
        -(lin + quad)
    }

    /// Jointly optimizes `α_i, α_j`. Returns whether anything moved.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let s = yi * yj;
        let (lo, hi) = if s < 0.0 {
            ((aj - ai).max(0.0), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(0.0), (ai + aj).min(self.c))
        };
        if hi - lo <= 1e-15 * self.c {
            return false;
        }
        let eta = self.kij(i, i) + self.kij(j, j) - 2.0 * self.kij(i, j);
        let mut aj_new = if eta > 1e-12 {
            (aj + yj * (self.f[i] - self.f[j]) / eta).clamp(lo, hi)
        } else {
            let at = |a_j: f64| self.pair_objective(i, j, ai + s * (aj - a_j), a_j);
            let (ol, oh) = (at(lo), at(hi));
            if ol > oh + 1e-12 {
                lo
            } else if oh > ol + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        // snap to the box so bound membership is exact; lo/hi carry rounding
        // from ai ± aj, so 0 and C are checked separately
        let c = self.c;
        let snap = |a: f64| if a < 1e-12 * c { 0.0 } else if c - a < 1e-12 * c { c } else { a };
        if aj_new - lo < 1e-12 * c {
            aj_new = lo;
        } else if hi - aj_new < 1e-12 * c {
            aj_new = hi;
        }
        aj_new = snap(aj_new);
        let ai_new = snap((ai + s * (aj - aj_new)).clamp(0.0, c));
        let daj = aj_new - aj;
        if daj.abs() < 1e-14 * c.max(1.0) && ai_new == ai {
            return false;
        }
        let dai = ai_new - ai;
        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        for t in 0..self.n {
            self.f[t] += yi * dai * self.kij(i, t) + yj * daj * self.kij(j, t);
        }
        true
    }
}

/// Trains a binary SVM on labels in {−1, +1}.
pub fn smo_train_binary(x: &Matrix, y: &[f64], kernel: &KernelSpec, cfg: &SmoConfig) -> Result<SvmBinaryModel, ClassicalError> {
    kernel.validate()?;
    let n = x.rows();
    if n != y.len() {
        return Err(ClassicalError::LengthMismatch(n, y.len()));
    }
    if n < 2 {
        return Err(ClassicalError::TooFewRows(2));
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(ClassicalError::BadBinaryLabel(bad));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(ClassicalError::SingleClass);
    }

    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let mut s = Solver { y, k, n, c: kernel.c, alpha: vec![0.0; n], f: y.iter().map(|v| -v).collect() };

    // simplified Platt loop with seeded random partner choice
    let mut rng = RngState::new(cfg.seed);
    let mut quiet = 0;
    let mut sweeps = 0;
    while quiet < cfg.max_passes && sweeps < 10 * cfg.max_passes.max(1) + 100 {
        let mut changed = 0;
        for i in 0..n {
            if s.violates(i, s.bias(), cfg.tol) {
                let mut j = rng.below(n - 1);
                if j >= i {
                    j += 1;
                }
                if s.take_step(i, j) {
                    changed += 1;
                }
            }
        }
        quiet = if changed == 0 { quiet + 1 } else { 0 };
        sweeps += 1;
    }

    // maximal violating pair until the gap closes
    let mut converged = false;
    let mut gap = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let (iu, il, lo, hi) = s.extremes();
        gap = lo - hi;
        if gap <= cfg.tol {
            converged = true;
            break;
        }
        if !s.take_step(iu, il) {
            break;
        }
    }
    if !converged {
        log::warn!("SMO stopped with optimality gap {gap:.3e} above tol {:.1e}", cfg.tol);
    }
    let bias = s.bias();

    let support_indices: Vec<usize> = (0..n).filter(|&i| s.alpha[i] > 0.0).collect();
    let mut sv = Matrix::zeros(support_indices.len(), x.cols());
    for (r, &i) in support_indices.iter().enumerate() {
        sv.row_mut(r).copy_from_slice(x.row(i));
    }
    Ok(SvmBinaryModel {
        kernel: *kernel,
        alphas: support_indices.iter().map(|&i| s.alpha[i]).collect(),
        labels: support_indices.iter().map(|&i| y[i]).collect(),
        support_indices,
        support_vectors: sv,
        bias,
        gap,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_closed_form() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let m = smo_train_binary(&x, &[-1.0, 1.0], &KernelSpec::linear(10.0), &SmoConfig::default()).unwrap();
        assert_eq!(m.support_indices, vec![0, 1]);
        assert!((m.alphas[0] - 0.5).abs() < 1e-9 && (m.alphas[1] - 0.5).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-9);
        for v in [-3.0, -0.25, 0.0, 2.0] {
            assert!((m.decision(&[v]).unwrap() - v).abs() < 1e-9);
        }
    }

    #[test]
    fn xor_rbf() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let y = [-1.0, -1.0, 1.0, 1.0];
        let m = smo_train_binary(&x, &y, &KernelSpec::rbf(10.0, 1.0), &SmoConfig::default()).unwrap();
        assert!(m.converged);
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(m.decision(x.row(i)).unwrap().signum(), label);
        }
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(
            smo_train_binary(&x, &[1.0, 1.0], &KernelSpec::linear(1.0), &SmoConfig::default()),
            Err(ClassicalError::SingleClass)
        );
        assert!(matches!(
            smo_train_binary(&x, &[1.0, -1.0], &KernelSpec::linear(0.0), &SmoConfig::default()),
            Err(ClassicalError::Hyper(_))
        ));
        assert!(matches!(
            smo_train_binary(&x, &[1.0, -1.0], &KernelSpec::rbf(1.0, -2.0), &SmoConfig::default()),
            Err(ClassicalError::Hyper(_))
        ));
        assert!(matches!(
            smo_train_binary(&x, &[1.0, 0.0], &KernelSpec::linear(1.0), &SmoConfig::default()),
            Err(ClassicalError::BadBinaryLabel(_))
        ));
    }

    #[test]
    fn alpha_within_rounding_of_c_is_snapped() {
        // α_0 sits 2.8e-17 below C; the free step only moves by rounding noise
        let y = [1.0, -1.0];
        let k = vec![1.0, 0.0, 0.0, 1.0];
        let c = 0.1;
        let alpha = vec![0.09999999999999998, 0.03333333333332028];
        let f = (0..2).map(|t| (0..2).map(|u| alpha[u] * y[u] * k[t * 2 + u]).sum::<f64>() - y[t]).collect();
        let mut s = Solver { y: &y, k, n: 2, c, alpha, f };
        assert!(s.in_up(0));
        assert!(s.take_step(0, 1));
        assert_eq!(s.alpha[0], c);
        assert!(!s.in_up(0));
    }

    #[test]
    fn duplicate_points_with_opposite_labels() {
        // eta == 0 path
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![-1.0]]).unwrap();
        let m = smo_train_binary(&x, &[1.0, -1.0, -1.0], &KernelSpec::linear(1.0), &SmoConfig::default()).unwrap();
        assert!(m.converged);
        assert!(m.alphas.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }
}
