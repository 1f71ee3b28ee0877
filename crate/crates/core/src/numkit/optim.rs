use serde::{Deserialize, Serialize};

use super::NumError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OptimizerRule {
    Sgd { lr: f64 },
    Adam(AdamHyper),
}

impl Default for OptimizerRule {
    fn default() -> Self {
        OptimizerRule::Adam(AdamHyper::default())
    }
}

/// Per-tensor moment buffers plus the shared step counter.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    pub t: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

/// One update over a list of parameter tensors.
///
/// The step counter advances once per call, whatever the rule.
pub fn optimizer_step(
    rule: &OptimizerRule,
    state: &mut OptimizerState,
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
) -> Result<(), NumError> {
    if params.len() != grads.len() {
        return Err(NumError::ShapeMismatch {
            expected: format!("{} gradient tensors", params.len()),
            actual: format!("{}", grads.len()),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(NumError::ShapeMismatch {
                expected: format!("tensor {i} of length {}", p.len()),
                actual: format!("gradient of length {}", g.len()),
            });
        }
    }
    state.t += 1;
    match rule {
        OptimizerRule::Sgd { lr } => {
            for (p, g) in params.iter_mut().zip(grads) {
                for (pi, gi) in p.iter_mut().zip(g.iter()) {
                    *pi -= lr * gi;
                }
            }
        }
        OptimizerRule::Adam(h) => {
            if state.moments.len() != params.len() {
                state.moments = params.iter().map(|p| (vec![0.0; p.len()], vec![0.0; p.len()])).collect();
            }
            let t = state.t as i32;
            let c1 = 1.0 - h.beta1.powi(t);
            let c2 = 1.0 - h.beta2.powi(t);
            for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.moments.iter_mut()) {
                for i in 0..p.len() {
                    let gi = g[i];
                    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
                    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    p[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
                }
            }
        }
    }
    Ok(())
}
