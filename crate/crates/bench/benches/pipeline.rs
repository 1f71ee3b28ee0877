use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ljp_bench::{binary_problem, corpus, pleading_tokens, preprocess_config};
use ljp_core::app::{handle_predict, train_artifact, ArtifactSpec, PredictRequest, Registry};
use ljp_core::artext::preprocess;
use ljp_core::classical::{smo_train_binary, KernelSpec, SmoConfig};
use ljp_core::corpus::Task;
use ljp_core::eval::PreprocessSettings;
use ljp_core::features::{encode_sequence, fit_vocab, tfidf_fit};
use ljp_core::neural::{init_model, ArchSpec, Head};
use ljp_core::pipeline::{ModelFamily, Representation, TrainSettings};

fn bench_preprocess(c: &mut Criterion) {
    let cases = corpus(25);
    let cfg = preprocess_config();
    c.bench_function("preprocess/100_pleadings", |b| {
        b.iter(|| {
            for case in &cases.cases {
                black_box(preprocess(black_box(&case.pleading), &cfg));
            }
        })
    });
}

fn bench_tfidf(c: &mut Criterion) {
    let docs = pleading_tokens(&corpus(50));
    c.bench_function("tfidf/fit_200", |b| b.iter(|| tfidf_fit(black_box(&docs)).unwrap()));
    let v = tfidf_fit(&docs).unwrap();
    c.bench_function("tfidf/transform_200", |b| {
        b.iter(|| {
            for d in &docs {
                black_box(v.transform(d).unwrap());
            }
        })
    });
}

fn bench_smo(c: &mut Criterion) {
    let mut group = c.benchmark_group("smo");
    group.sample_size(20);
    for n in [100, 300] {
        let (x, y) = binary_problem(n, 20, 3);
        group.bench_with_input(BenchmarkId::new("rbf", n), &n, |b, _| {
            b.iter(|| smo_train_binary(&x, &y, &KernelSpec::rbf(1.0, 0.05), &SmoConfig::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("linear", n), &n, |b, _| {
            b.iter(|| smo_train_binary(&x, &y, &KernelSpec::linear(1.0), &SmoConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_lstm(c: &mut Criterion) {
    let docs = pleading_tokens(&corpus(10));
    let vocab = fit_vocab(&docs, 1).unwrap();
    let mut group = c.benchmark_group("lstm_forward");
    group.sample_size(20);
    for (name, arch) in [("lstm", ArchSpec::lstm(4, Head::Softmax)), ("bilstm", ArchSpec::bilstm(4, Head::Softmax))] {
        let model = init_model(arch, 1, None, &vocab).unwrap();
        let seq = encode_sequence(&docs[0], &vocab, arch.maxlen).unwrap();
        group.bench_function(name, |b| b.iter(|| model.forward(black_box(&seq)).unwrap()));
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let cases = corpus(25);
    let pre = PreprocessSettings::default();
    let settings = TrainSettings::default();
    let mut registry = Registry::new();
    for (id, family) in [("lr", ModelFamily::Lr), ("svm", ModelFamily::Svm)] {
        let spec = ArtifactSpec {
            id: id.into(),
            task: Task::Judgment,
            family,
            representation: Representation::Tfidf,
            preprocess: &pre,
            settings: &settings,
            seed: 1,
            store: None,
        };
        registry.insert(train_artifact(&spec, &cases).unwrap().0).unwrap();
    }
    let pleading = cases.cases[0].pleading.clone();
    for id in ["lr", "svm"] {
        let req = PredictRequest { model: id.into(), pleading: pleading.clone(), ..Default::default() };
        c.bench_function(&format!("handle_predict/{id}_tfidf"), |b| b.iter(|| handle_predict(&registry, black_box(&req)).unwrap()));
    }
}

criterion_group!(benches, bench_preprocess, bench_tfidf, bench_smo, bench_lstm, bench_predict);
criterion_main!(benches);
