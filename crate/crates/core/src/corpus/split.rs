use std::collections::BTreeMap;

use super::{CaseSet, CorpusError, Task};
use crate::numkit::RngState;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: CaseSet,
    pub test: CaseSet,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Index-level stratified split; returns `(train, test)` positions in input order.
///
/// The test total is `round(fraction * n)`. Each class first gets
/// `floor(fraction * size)`; leftover slots go to the largest fractional
/// remainders (ties to the lower class), never taking a class's last member.
pub fn stratified_indices(labels: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction.is_nan() {
        return Err(CorpusError::BadFraction(test_fraction));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if test_fraction == 0.0 {
        return Ok(((0..labels.len()).collect(), Vec::new()));
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < 2) {
        return Err(CorpusError::ClassTooSmall { class, count: members.len() });
    }

    let total = (test_fraction * labels.len() as f64).round() as usize;
    let mut quota: Vec<(usize, usize, f64, usize)> = by_class
        .iter()
        .map(|(&c, m)| {
            let exact = test_fraction * m.len() as f64;
            (c, exact.floor() as usize, exact - exact.floor(), m.len())
        })
        .collect();
    let mut assigned: usize = quota.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| quota[b].2.total_cmp(&quota[a].2).then(quota[a].0.cmp(&quota[b].0)));
    for &k in &order {
        if assigned >= total {
            break;
        }
        if quota[k].1 + 1 < quota[k].3 {
            quota[k].1 += 1;
            assigned += 1;
        }
    }

    let mut rng = RngState::new(seed);
    let mut is_test = vec![false; labels.len()];
    for (c, take, _, _) in quota {
        let mut members = by_class[&c].clone();
        rng.shuffle(&mut members);
        for &i in &members[..take] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| is_test[i]);
    Ok((train, test))
}

/// Stratifies on the label `task` predicts.
pub fn split_stratified(cs: &CaseSet, test_fraction: f64, seed: u64, task: Task) -> Result<SplitPair, CorpusError> {
    let (train, test) = stratified_indices(&cs.labels(task), test_fraction, seed)?;
    Ok(SplitPair { train: cs.subset(&train), test: cs.subset(&test), seed, test_fraction })
}
