use super::NumError;

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, NumError> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out)?;
    Ok(out)
}

pub fn softmax_in_place(x: &mut [f64]) -> Result<(), NumError> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(NumError::NonFinite("softmax input"));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(z: f64) -> f64 {
    z.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BceOutput {
    pub probability: f64,
    pub loss: f64,
    /// d loss / d logit
    pub grad: f64,
}

/// Sigmoid followed by binary cross-entropy against a 0/1 target.
pub fn sigmoid_bce(logit: f64, target: f64) -> BceOutput {
    let probability = sigmoid(logit);
    // max(z, 0) - z t + ln(1 + e^{-|z|})
    let loss = logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p();
    BceOutput { probability, loss, grad: probability - target }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate().skip(1) {
        if *v > x[best] {
            best = i;
        }
    }
    best
}
