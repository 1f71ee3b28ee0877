use serde::Serialize;

use super::{relative_error, NumError, RngState};

/// A named contiguous range of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, offset: usize, len: usize) -> Self {
        ParamBlock { name: name.into(), offset, len }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub tolerance: f64,
    /// Check at most this many coordinates per block, chosen by `seed`.
    pub max_coords_per_block: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { eps: 1e-5, tolerance: 1e-4, max_coords_per_block: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinate (flat index) where the worst error occurred.
    pub worst_index: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `loss_fn` around `params`.
pub fn finite_diff_check<F>(
    mut loss_fn: F,
    params: &[f64],
    analytic: &[f64],
    blocks: &[ParamBlock],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NumError>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(NumError::ShapeMismatch {
            expected: format!("{} gradient values", params.len()),
            actual: format!("{}", analytic.len()),
        });
    }
    let whole = [ParamBlock::new("params", 0, params.len())];
    let blocks = if blocks.is_empty() { &whole[..] } else { blocks };

    let mut rng = RngState::new(opts.seed);
    let mut work = params.to_vec();
    let mut reports = Vec::with_capacity(blocks.len());
    let mut global = 0.0f64;

    for block in blocks {
        if block.offset + block.len > params.len() {
            return Err(NumError::ShapeMismatch {
                expected: format!("block within {} params", params.len()),
                actual: format!("{} at {}..{}", block.name, block.offset, block.offset + block.len),
            });
        }
        let mut coords: Vec<usize> = (block.offset..block.offset + block.len).collect();
        if let Some(k) = opts.max_coords_per_block {
            if coords.len() > k {
                rng.shuffle(&mut coords);
                coords.truncate(k);
                coords.sort_unstable();
            }
        }
        let mut worst = 0.0f64;
        let mut worst_index = None;
        for &i in &coords {
            let orig = work[i];
            work[i] = orig + opts.eps;
            let up = loss_fn(&work);
            work[i] = orig - opts.eps;
            let down = loss_fn(&work);
            work[i] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(NumError::NonFinite("loss during finite differences"));
            }
            let numeric = (up - down) / (2.0 * opts.eps);
            let err = relative_error(analytic[i], numeric);
            if err > worst || worst_index.is_none() {
                worst = err;
                worst_index = Some(i);
            }
        }
        global = global.max(worst);
        reports.push(BlockReport {
            name: block.name.clone(),
            checked: coords.len(),
            max_rel_error: worst,
            worst_index,
        });
    }

    Ok(GradCheckReport { blocks: reports, max_rel_error: global, tolerance: opts.tolerance, passed: global < opts.tolerance })
}
