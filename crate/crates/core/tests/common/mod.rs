//! Independent reference implementations and fixtures shared by the
//! integration tests. The oracles do not call into the code they check.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use ljp_core::artext::{
    default_diacritics, drop_stopwords, is_delimiter, preprocess, remove_dates, strip_diacritics, tokenize,
    PreprocessConfig, TokenList,
};
use ljp_core::classical::{KernelKind, KernelSpec};
use ljp_core::numkit::RngState;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Term weights by token: raw count times `ln(N / df)`, straight from the
/// definition with no shared code.
pub fn brute_tfidf(docs: &[TokenList], doc: &TokenList) -> BTreeMap<String, f64> {
    let n = docs.len() as f64;
    let mut out = BTreeMap::new();
    for t in doc.iter() {
        if out.contains_key(t) {
            continue;
        }
        let df = docs.iter().filter(|d| d.iter().any(|u| u == t)).count();
        if df == 0 {
            continue;
        }
        let tf = doc.iter().filter(|u| *u == t).count() as f64;
        out.insert(t.clone(), tf * (n / df as f64).ln());
    }
    out
}

pub fn kernel(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    match spec.kind {
        KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        KernelKind::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-spec.gamma * d2).exp()
        }
    }
}

pub fn gram(spec: &KernelSpec, x: &[Vec<f64>], y: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            q[i][j] = y[i] * y[j] * kernel(spec, &x[i], &x[j]);
        }
    }
    q
}

pub fn dual_value(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let mut quad = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            quad += a[i] * a[j] * q[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ a ≤ c, yᵀa = 0}` by bisection on the
/// multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let h = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    // h is non-increasing in lam
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Power iteration; `q` is symmetric positive semidefinite.
pub fn largest_eigenvalue(q: &[Vec<f64>]) -> f64 {
    let n = q.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

/// Maximizes the SVM dual with accelerated projected gradient ascent.
/// Returns `(alphas, objective)`.
pub fn dual_qp_oracle(spec: &KernelSpec, x: &[Vec<f64>], y: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let q = gram(spec, x, y);
    let n = x.len();
    let lip = largest_eigenvalue(&q) * 1.01 + 1e-12;
    let step = 1.0 / lip;
    let mut a = project(&vec![0.0; n], y, spec.c);
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut best = (a.clone(), dual_value(&q, &a));
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>()).collect();
        let next = project(&z.iter().zip(&grad).map(|(zi, gi)| zi + step * gi).collect::<Vec<_>>(), y, spec.c);
        let val = dual_value(&q, &next);
        if val < dual_value(&q, &a) {
            // restart momentum when the objective goes backwards
            t = 1.0;
            z = a.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(nv, av)| nv + (t - 1.0) / t_next * (nv - av)).collect();
        a = next;
        t = t_next;
        if val > best.1 {
            best = (a.clone(), val);
        }
    }
    best
}

/// Seeded binary dataset: two Gaussian blobs with some overlap.
pub fn binary_dataset(seed: u64, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = RngState::new(seed);
    let shift = rng.uniform(0.5, 2.0);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        x.push((0..dim).map(|_| rng.normal() + label * shift).collect());
        y.push(label);
    }
    (x, y)
}

/// Per-class precision, recall and F1 from label lists, then macro means
/// and accuracy, all as fractions.
pub struct OracleMetrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

pub fn oracle_metrics(y_true: &[usize], y_pred: &[usize], k: usize) -> OracleMetrics {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    let mut f1 = Vec::new();
    for c in 0..k {
        let tp = y_true.iter().zip(y_pred).filter(|(t, p)| **t == c && **p == c).count();
        let predicted = y_pred.iter().filter(|p| **p == c).count();
        let actual = y_true.iter().filter(|t| **t == c).count();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        precision.push(p);
        recall.push(r);
        f1.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    OracleMetrics {
        macro_p: mean(&precision),
        macro_r: mean(&recall),
        macro_f1: mean(&f1),
        accuracy: ratio(hits, y_true.len()),
        precision,
        recall,
        f1,
    }
}

/// Expands a count matrix (rows true, columns predicted) into label lists.
pub fn labels_from_counts(counts: &[Vec<u64>]) -> (Vec<usize>, Vec<usize>) {
    let mut t = Vec::new();
    let mut p = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                t.push(i);
                p.push(j);
            }
        }
    }
    (t, p)
}

/// Random token lists over a small vocabulary.
pub fn random_corpus(rng: &mut RngState, max_docs: usize, vocab: usize) -> Vec<TokenList> {
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    let n = 1 + rng.below(max_docs);
    (0..n)
        .map(|_| {
            let len = rng.below(9);
            (0..len).map(|_| words[rng.below(words.len())].clone()).collect()
        })
        .collect()
}

#[derive(serde::Deserialize)]
struct Golden {
    stage: String,
    name: String,
    input: serde_json::Value,
    expected: serde_json::Value,
}

fn as_tokens(v: &serde_json::Value) -> TokenList {
    v.as_array().expect("token array").iter().map(|t| t.as_str().expect("string token").to_owned()).collect()
}

/// Runs the frozen preprocessing goldens. Returns `(cases run, mismatches)`.
pub fn run_goldens() -> (usize, Vec<String>) {
    let body = std::fs::read_to_string(fixture("preprocess_golden.jsonl")).expect("golden file");
    let cfg = PreprocessConfig::default();
    let diacritics = default_diacritics();
    let mut failures = Vec::new();
    let mut n = 0;
    for line in body.lines().filter(|l| !l.trim().is_empty()) {
        let g: Golden = serde_json::from_str(line).expect("golden row");
        n += 1;
        let text = || g.input.as_str().expect("string input");
        let ok = match g.stage.as_str() {
            "strip" => strip_diacritics(text(), &diacritics) == g.expected.as_str().unwrap(),
            "dates" => remove_dates(text()) == g.expected.as_str().unwrap(),
            "tokenize" => tokenize(text()) == as_tokens(&g.expected),
            "stopwords" => drop_stopwords(&as_tokens(&g.input), cfg.stoplist()) == as_tokens(&g.expected),
            "preprocess" => preprocess(text(), &cfg) == as_tokens(&g.expected),
            other => panic!("unknown golden stage {other}"),
        };
        if !ok {
            failures.push(format!("{}/{}", g.stage, g.name));
        }
    }
    (n, failures)
}

const PIECES: &[&str] = &[
    "عام", "سنة", "بتاريخ", "في", "من", "إلى", "هذا", "و", "المحكمة", "حضانة", "الأم", "مـــدرسة", "الْحَمْدُ",
    "هـ", "م", "1440", "1999", "2020", "١٤٤١", "12", "05", "٠٢", "/", "-", ".", "،", "؟", " ", "  ", "\t", "\n",
    "\u{064B}", "\u{0651}", "\u{0670}", "\u{0640}", "\u{200F}", "a", "Z", "٣", "7", "«", "»", "(", ")",
];

/// Seeded strings built from Arabic words, diacritics, digits, date
/// fragments and punctuation, so dates and stop words collide often.
pub fn random_texts(seed: u64, count: usize) -> Vec<String> {
    let mut rng = RngState::new(seed);
    (0..count)
        .map(|_| {
            let len = rng.below(16);
            let mut s = String::new();
            for _ in 0..len {
                if rng.below(8) == 0 {
                    s.push(char::from_u32(0x600 + rng.below(0x100) as u32).unwrap_or(' '));
                } else {
                    s.push_str(PIECES[rng.below(PIECES.len())]);
                }
            }
            s
        })
        .collect()
}

/// Idempotence and token-shape properties over `texts`; returns violations.
pub fn check_text_properties(texts: &[String]) -> Vec<String> {
    let cfg = PreprocessConfig::default();
    let set = default_diacritics();
    let mut bad = Vec::new();
    for t in texts {
        let once = preprocess(t, &cfg);
        if preprocess(&once.join(" "), &cfg) != once {
            bad.push(format!("preprocess not idempotent on {t:?}"));
        }
        let s = strip_diacritics(t, &set);
        if strip_diacritics(&s, &set) != s {
            bad.push(format!("strip not idempotent on {t:?}"));
        }
        if s.chars().any(|c| !t.contains(c)) || s.chars().count() > t.chars().count() {
            bad.push(format!("strip introduced characters on {t:?}"));
        }
        if tokenize(t).iter().chain(once.iter()).any(|tok| tok.is_empty() || tok.chars().any(is_delimiter)) {
            bad.push(format!("bad token from {t:?}"));
        }
    }
    bad
}
