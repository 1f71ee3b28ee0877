//! Acceptance run: one PASS/FAIL line per headline criterion.
//!
//! Run with `cargo test -p ljp-core --test acceptance -- --nocapture`.
//! Failures are printed; set `LJP_ACCEPTANCE_STRICT=1` to also fail the test.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use ljp_core::app::{train_artifact, ArtifactSpec, ModelArtifact};
use ljp_core::classical::{smo_train_binary, KernelSpec, LogRegModel, SmoConfig};
use ljp_core::corpus::{generate_synthetic, synthetic_embeddings, CaseCatalogs, CaseSet, CaseType, SynthSpec, Task};
use ljp_core::eval::{confusion, macro_metrics, run_experiment, ConfusionMatrix, ExperimentConfig, PreprocessSettings};
use ljp_core::features::{fit_vocab, tfidf_fit, EmbeddingStore, IndexSequence};
use ljp_core::neural::{init_model, ArchSpec, EmbeddingInit, Head, Target};
use ljp_core::numkit::{finite_diff_check, AdamHyper, GradCheckOptions, OptimizerRule, ParamBlock, RngState};
use ljp_core::pipeline::{ModelFamily, Representation, StoreRef, TaskText, TrainSettings};
use ljp_core::Matrix;

use common::*;

struct Outcome {
    name: &'static str,
    passed: bool,
}

fn criterion(name: &'static str, budget: Duration, check: impl FnOnce() -> Result<String, String>) -> Outcome {
    let t0 = Instant::now();
    let result = check();
    let elapsed = t0.elapsed();
    let in_time = elapsed <= budget;
    let (passed, detail) = match result {
        Ok(d) if in_time => (true, d),
        Ok(d) => (false, format!("{d}; over the {:.0}s budget", budget.as_secs_f64())),
        Err(d) => (false, d),
    };
    println!(
        "{} {name} [{:.2}s / {:.0}s] {detail}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    Outcome { name, passed }
}

fn tfidf_oracle() -> Result<String, String> {
    let mut rng = RngState::new(2024);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let docs = random_corpus(&mut rng, 10, 8);
        let v = tfidf_fit(&docs).map_err(|e| e.to_string())?;
        let vocab = v.vocabulary().map_err(|e| e.to_string())?;
        for doc in &docs {
            let got = v.transform(doc).map_err(|e| e.to_string())?.to_dense();
            let want = brute_tfidf(&docs, doc);
            for (i, tok) in vocab.tokens().iter().enumerate() {
                let w = want.get(tok).copied().unwrap_or(0.0);
                let err = (got[i] - w).abs();
                worst = worst.max(err);
                if err > 1e-9 {
                    return Err(format!("corpus {case}, token {tok}: {} vs {w}", got[i]));
                }
            }
        }
    }
    Ok(format!("50 corpora, max abs error {worst:.1e}"))
}

fn smo_vs_oracle() -> Result<String, String> {
    let cfg = SmoConfig::default();
    let mut worst_kkt = 0.0f64;
    let mut worst_obj = 0.0f64;
    for i in 0..20u64 {
        let n = 10 + (i as usize * 7) % 31;
        let dim = 2 + i as usize % 3;
        let c = [0.1, 1.0, 10.0][i as usize % 3];
        let spec = if i % 2 == 0 { KernelSpec::linear(c) } else { KernelSpec::rbf(c, 0.5) };
        let (x, y) = binary_dataset(100 + i, n, dim);
        let xm = Matrix::from_rows(&x).map_err(|e| e.to_string())?;
        let m = smo_train_binary(&xm, &y, &spec, &cfg).map_err(|e| e.to_string())?;
        let mut alpha = vec![0.0; n];
        for (k, &idx) in m.support_indices.iter().enumerate() {
            alpha[idx] = m.alphas[k];
        }
        let eq: f64 = alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        if eq.abs() > 1e-6 || alpha.iter().any(|&a| a < -1e-6 || a > c + 1e-6) {
            return Err(format!("dataset {i}: constraint violated (Σαy = {eq:e})"));
        }
        for k in 0..n {
            let f: f64 = (0..n).map(|j| alpha[j] * y[j] * kernel(&spec, &x[j], &x[k])).sum::<f64>() + m.bias;
            let margin = y[k] * f;
            let r = if alpha[k] <= 1e-8 * c {
                (1.0 - margin).max(0.0)
            } else if alpha[k] >= c * (1.0 - 1e-8) {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            worst_kkt = worst_kkt.max(r);
        }
        if worst_kkt > 1e-3 {
            return Err(format!("dataset {i}: KKT residual {worst_kkt:.2e}"));
        }
        let (_, oracle) = dual_qp_oracle(&spec, &x, &y, 20_000);
        let got = dual_value(&gram(&spec, &x, &y), &alpha);
        let diff = (got - oracle).abs();
        worst_obj = worst_obj.max(diff);
        if diff > 1e-3 {
            return Err(format!("dataset {i}: dual objective {got} vs oracle {oracle}"));
        }
    }

    let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
    let m = smo_train_binary(&x, &[1.0, -1.0], &KernelSpec::linear(10.0), &cfg).map_err(|e| e.to_string())?;
    let mut a = [0.0; 2];
    for (k, &idx) in m.support_indices.iter().enumerate() {
        a[idx] = m.alphas[k];
    }
    if (a[0] - 0.5).abs() > 1e-9 || (a[1] - 0.5).abs() > 1e-9 || m.bias.abs() > 1e-9 {
        return Err(format!("two-point case: alpha {a:?}, b {}", m.bias));
    }
    Ok(format!("20 datasets, max KKT residual {worst_kkt:.1e}, max |Δ dual| {worst_obj:.1e}; two-point α=(0.5,0.5) b=0"))
}

fn gradient_checks() -> Result<String, String> {
    let opts = GradCheckOptions::default();
    let mut rng = RngState::new(5);
    let mut lines = Vec::new();

    let x = Matrix::from_rows(&(0..6).map(|_| (0..4).map(|_| rng.normal()).collect()).collect::<Vec<_>>()).unwrap();
    let y = vec![0, 1, 2, 1, 0, 2];
    let mut lr = LogRegModel::zeros(3, 4, 0.1);
    let flat: Vec<f64> = (0..lr.to_flat().len()).map(|_| rng.uniform(-1.0, 1.0)).collect();
    lr.set_flat(&flat);
    let rows: Vec<usize> = (0..6).collect();
    let (_, g) = lr.loss_and_grad(&x, &y, &rows);
    let blocks = [ParamBlock::new("weights", 0, 12), ParamBlock::new("bias", 12, 3)];
    let probe = lr.clone();
    let r = finite_diff_check(
        |p| {
            let mut m = probe.clone();
            m.set_flat(p);
            m.training_loss(&x, &y)
        },
        &flat,
        &g,
        &blocks,
        &opts,
    )
    .map_err(|e| e.to_string())?;
    if !r.passed {
        return Err(format!("LR: {r:?}"));
    }
    lines.push(format!("LR {:.1e}", r.max_rel_error));

    let doc: ljp_core::artext::TokenList = ["a", "b", "c", "d", "e"].into_iter().collect();
    let vocab = fit_vocab(&[doc], 1).unwrap();
    for (bi, head) in [(false, Head::Softmax), (true, Head::Softmax), (false, Head::Sigmoid), (true, Head::Sigmoid)] {
        let arch = ArchSpec {
            maxlen: 5,
            embed_dim: 3,
            lstm_units: 3,
            bidirectional: bi,
            dense_units: 3,
            head,
            n_classes: 3,
            embedding_init: EmbeddingInit::Random,
        };
        let mut m = init_model(arch, 9, None, &vocab).map_err(|e| e.to_string())?;
        let mut flat = m.to_flat();
        let e = arch.embed_dim;
        for v in flat.iter_mut().skip(e) {
            *v = rng.uniform(-1.0, 1.0);
        }
        m.set_flat(&flat).map_err(|e| e.to_string())?;
        let seqs = vec![IndexSequence(vec![2, 3, 4, 0, 0]), IndexSequence(vec![5, 1, 2, 6, 0]), IndexSequence(vec![6, 6, 3, 2, 5])];
        let targets = match head {
            Head::Softmax => vec![Target::Class(0), Target::Class(2), Target::Class(1)],
            Head::Sigmoid => vec![
                Target::Binary(vec![1.0, 0.0, 1.0]),
                Target::Binary(vec![0.0, 0.0, 1.0]),
                Target::Binary(vec![0.0, 1.0, 0.0]),
            ],
        };
        let (_, g) = m.loss_and_grads(&seqs, &targets, None).map_err(|e| e.to_string())?;
        let mut blocks = m.param_blocks();
        blocks[0] = ParamBlock::new("embedding", e, blocks[0].len - e);
        for id in [1usize, 2, 3, 4, 5, 6] {
            if g[id * e..(id + 1) * e].iter().all(|v| *v == 0.0) {
                return Err(format!("embedding row {id} untouched by the batch"));
            }
        }
        let r = finite_diff_check(|p| m.loss_at(p, &seqs, &targets).unwrap(), &flat, &g, &blocks, &opts)
            .map_err(|e| e.to_string())?;
        let name = format!("{}-{head:?}", if bi { "BiLSTM" } else { "LSTM" });
        if !r.passed || r.blocks.iter().any(|b| b.checked == 0) {
            return Err(format!("{name}: {:?}", r.blocks));
        }
        lines.push(format!("{name} {:.1e} over {} tensors", r.max_rel_error, r.blocks.len()));
    }
    Ok(lines.join(", "))
}

/// The synthetic custody corpus and an on-disk word-vector file for it.
struct E2e {
    cases: CaseSet,
    store: StoreRef,
    config: ExperimentConfig,
    _dir: tempfile::TempDir,
}

fn e2e_setup() -> E2e {
    let spec = SynthSpec::builtin(CaseType::Custody, 25);
    let cases = generate_synthetic(&spec, &CaseCatalogs::builtin(CaseType::Custody), 42).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    std::fs::write(&path, synthetic_embeddings(&spec, 32, 42).to_text()).unwrap();
    let store = StoreRef { path: path.display().to_string(), store: Arc::new(EmbeddingStore::load(&path).unwrap()) };
    E2e { cases, store, config: acceptance_config(path.display().to_string()), _dir: dir }
}

/// Default experiment with the neural widths reduced to 64 so the whole
/// table trains in seconds on a laptop CPU.
fn acceptance_config(embeddings: String) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { embeddings: Some(embeddings.into()), ..Default::default() };
    let n = &mut cfg.train.neural;
    n.embed_dim = 64;
    n.lstm_units = 64;
    n.bilstm_units = 32;
    n.dense_units = 64;
    n.train.optimizer = OptimizerRule::Adam(AdamHyper { lr: 0.005, ..Default::default() });
    cfg
}

fn end_to_end(e: &E2e) -> Result<String, String> {
    let (report, timings) = run_experiment(&e.config, &e.cases, Some(&e.store)).map_err(|e| e.to_string())?;
    println!("{}", report.render_table());
    let names: Vec<&str> = report.rows.iter().map(|r| r.name.as_str()).collect();
    let expected = [
        "SVM-TFIDF", "SVM-Word2Vec", "LR-TFIDF", "LR-Word2Vec", "LSTM-TFIDF", "LSTM-Word2Vec", "BILSTM-TFIDF",
        "BILSTM-Word2Vec",
    ];
    if names != expected {
        return Err(format!("rows {names:?}"));
    }
    if report.data.n_train != 75 || report.data.n_test != 25 {
        return Err(format!("split {}/{}", report.data.n_train, report.data.n_test));
    }
    let mut short = Vec::new();
    for r in &report.rows {
        let floor = match (r.model, r.representation) {
            (ModelFamily::Svm | ModelFamily::Lr, Representation::Tfidf) => Some(95.0),
            (ModelFamily::Lstm | ModelFamily::Bilstm, _) => Some(90.0),
            _ => None,
        };
        if let Some(f) = floor {
            if r.metrics.accuracy < f {
                short.push(format!("{} {:.0}% < {f:.0}%", r.name, r.metrics.accuracy));
            }
        }
        if r.best_epoch.is_some_and(|b| b >= 30) {
            short.push(format!("{} used more than 30 epochs", r.name));
        }
    }
    let accs: Vec<String> = report.rows.iter().map(|r| format!("{} {:.0}", r.name, r.metrics.accuracy)).collect();
    let summary = format!("{} ({:.1}s of training)", accs.join(", "), timings.total_seconds);
    if short.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", short.join("; ")))
    }
}

fn metrics_oracle() -> Result<String, String> {
    let cm = ConfusionMatrix::from_counts(vec![vec![1, 1], vec![0, 2]]).unwrap();
    let m = macro_metrics(&cm).map_err(|e| e.to_string())?;
    if m.accuracy != 75.0 || (m.f1 - 220.0 / 3.0).abs() > 1e-9 {
        return Err(format!("hand example: acc {} F1 {}", m.accuracy, m.f1));
    }
    let mut rng = RngState::new(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = 2 + rng.below(5);
        let counts: Vec<Vec<u64>> =
            (0..k).map(|_| (0..k).map(|_| if rng.below(4) == 0 { 0 } else { rng.below(20) as u64 }).collect()).collect();
        let (t, p) = labels_from_counts(&counts);
        if t.is_empty() {
            continue;
        }
        let got = macro_metrics(&confusion(&t, &p, k).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let want = oracle_metrics(&t, &p, k);
        let mut diffs = vec![
            got.precision / 100.0 - want.macro_p,
            got.recall / 100.0 - want.macro_r,
            got.f1 / 100.0 - want.macro_f1,
            got.accuracy / 100.0 - want.accuracy,
        ];
        for (c, pc) in got.per_class.iter().enumerate() {
            diffs.extend([pc.precision - want.precision[c], pc.recall - want.recall[c], pc.f1 - want.f1[c]]);
        }
        let d = diffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(d);
        if d > 1e-9 {
            return Err(format!("matrix {counts:?}: difference {d:e}"));
        }
    }
    Ok(format!("hand example acc 75 / macro F1 73.33; 100 random matrices, max diff {worst:.1e}"))
}

fn determinism_and_persistence(e: &E2e) -> Result<String, String> {
    let (a, _) = run_experiment(&e.config, &e.cases, Some(&e.store)).map_err(|e| e.to_string())?;
    let (b, _) = run_experiment(&e.config, &e.cases, Some(&e.store)).map_err(|e| e.to_string())?;
    if a.to_json() != b.to_json() {
        return Err("two runs produced different report bytes".into());
    }

    let fixtures = generate_synthetic(
        &SynthSpec::builtin(CaseType::Custody, 5),
        &CaseCatalogs::builtin(CaseType::Custody),
        4242,
    )
    .unwrap();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pre = PreprocessSettings::default();
    let mut settings = TrainSettings { neural: e.config.train.neural, ..Default::default() };
    settings.neural.train.epochs = 5;
    let kinds = [
        (Task::Judgment, ModelFamily::Svm, Representation::Tfidf),
        (Task::Judgment, ModelFamily::Lr, Representation::Word2vec),
        (Task::Evidence, ModelFamily::Lstm, Representation::Tfidf),
        (Task::Probability, ModelFamily::Bilstm, Representation::Word2vec),
    ];
    let mut checked = 0;
    for (k, &(task, family, representation)) in kinds.iter().enumerate() {
        let spec = ArtifactSpec {
            id: format!("m{k}"),
            task,
            family,
            representation,
            preprocess: &pre,
            settings: &settings,
            seed: 42,
            store: Some(&e.store),
        };
        let (art, _) = train_artifact(&spec, &e.cases).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("m{k}.aljp"));
        art.save(&path).map_err(|e| e.to_string())?;
        let back = ModelArtifact::load(&path, None).map_err(|e| e.to_string())?;
        for case in &fixtures.cases {
            let text = TaskText::from(case);
            let p = art.pipeline.predict_text(&text).map_err(|e| e.to_string())?;
            let q = back.pipeline.predict_text(&text).map_err(|e| e.to_string())?;
            let same = p.class == q.class
                && p.probabilities.iter().map(|v| v.to_bits()).eq(q.probabilities.iter().map(|v| v.to_bits()));
            if !same {
                return Err(format!("{family}-{representation} {task}: prediction changed after reload on {}", case.id));
            }
            checked += 1;
        }
    }
    Ok(format!("report bytes identical ({} bytes); {checked} reloaded predictions bit-identical", a.to_json().len()))
}

fn preprocessing_goldens() -> Result<String, String> {
    let (n, failures) = run_goldens();
    if !failures.is_empty() {
        return Err(format!("golden mismatches: {failures:?}"));
    }
    let texts = random_texts(99, 1000);
    let bad = check_text_properties(&texts);
    if let Some(first) = bad.first() {
        return Err(format!("{} property violations, first: {first}", bad.len()));
    }
    Ok(format!("{n} goldens bit-exact; properties hold on {} random strings", texts.len()))
}

#[test]
fn acceptance() {
    println!();
    let secs = Duration::from_secs;
    let e2e = e2e_setup();
    let outcomes = [
        criterion("tfidf-oracle", secs(5), tfidf_oracle),
        criterion("smo-correctness", secs(30), smo_vs_oracle),
        criterion("gradient-checks", secs(60), gradient_checks),
        criterion("end-to-end-synthetic", secs(300), || end_to_end(&e2e)),
        criterion("metrics-oracle", secs(5), metrics_oracle),
        criterion("determinism-persistence", secs(300), || determinism_and_persistence(&e2e)),
        criterion("preprocessing-goldens", secs(10), preprocessing_goldens),
    ];
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    println!("acceptance: {}/{} passed", outcomes.len() - failed.len(), outcomes.len());
    if std::env::var_os("LJP_ACCEPTANCE_STRICT").is_some() {
        assert!(failed.is_empty(), "failed: {failed:?}");
    }
}
