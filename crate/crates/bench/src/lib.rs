//! Inputs shared by the criterion benchmarks in `benches/`.

use ljp_core::artext::{preprocess, PreprocessConfig, TokenList};
use ljp_core::corpus::{generate_synthetic, CaseCatalogs, CaseSet, CaseType, SynthSpec};
use ljp_core::eval::PreprocessSettings;
use ljp_core::{Matrix, RngState};

pub fn corpus(per_class: usize) -> CaseSet {
    generate_synthetic(&SynthSpec::builtin(CaseType::Custody, per_class), &CaseCatalogs::builtin(CaseType::Custody), 7)
        .expect("builtin synthetic spec")
}

pub fn preprocess_config() -> PreprocessConfig {
    PreprocessSettings::default().build().expect("default preprocessing")
}

pub fn pleading_tokens(cases: &CaseSet) -> Vec<TokenList> {
    let cfg = preprocess_config();
    cases.cases.iter().map(|c| preprocess(&c.pleading, &cfg)).collect()
}

/// Two Gaussian blobs with labels ±1.
pub fn binary_problem(n: usize, dim: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = RngState::new(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        rows.push((0..dim).map(|_| rng.normal() + 0.6 * label).collect());
        y.push(label);
    }
    (Matrix::from_rows(&rows).expect("rectangular"), y)
}
