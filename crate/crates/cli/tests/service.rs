use std::sync::{Arc, OnceLock};

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use ljp_cli::server::{router, MAX_BODY_BYTES};
use ljp_core::app::{train_artifact, ApiError, ArtifactSpec, ErrorCode, ModelInfo, OutputKind, PredictResponse, Registry};
use ljp_core::corpus::{generate_synthetic, CaseCatalogs, CaseSet, CaseType, SynthSpec, Task};
use ljp_core::eval::PreprocessSettings;
use ljp_core::pipeline::{ModelFamily, Representation, TrainSettings};
use ljp_core::RngState;
use serde_json::{json, Value};
use tower::ServiceExt;

fn cases() -> CaseSet {
    generate_synthetic(&SynthSpec::builtin(CaseType::Custody, 8), &CaseCatalogs::builtin(CaseType::Custody), 9).unwrap()
}

fn registry() -> Arc<Registry> {
    static REG: OnceLock<Arc<Registry>> = OnceLock::new();
    REG.get_or_init(|| {
        let cs = cases();
        let pre = PreprocessSettings::default();
        let mut settings = TrainSettings::default();
        let n = &mut settings.neural;
        n.embed_dim = 8;
        n.lstm_units = 8;
        n.dense_units = 8;
        n.train.epochs = 2;
        let mut reg = Registry::new();
        for (id, task, family) in [
            ("judge", Task::Judgment, ModelFamily::Lr),
            ("evid", Task::Evidence, ModelFamily::Svm),
            ("prob", Task::Probability, ModelFamily::Lstm),
        ] {
            let spec = ArtifactSpec {
                id: id.into(),
                task,
                family,
                representation: Representation::Tfidf,
                preprocess: &pre,
                settings: &settings,
                seed: 5,
                store: None,
            };
            reg.insert(train_artifact(&spec, &cs).unwrap().0).unwrap();
        }
        Arc::new(reg)
    })
    .clone()
}

async fn call(method: Method, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(body.into()).unwrap();
    let resp = router(registry()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn post(body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    call(Method::POST, "/predict", body).await
}

fn api_error(bytes: &[u8]) -> ApiError {
    serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("not a structured error ({e}): {}", String::from_utf8_lossy(bytes)))
}

fn pleading() -> String {
    cases().cases[0].pleading.clone()
}

#[tokio::test]
async fn health_and_models() {
    let (status, body) = call(Method::GET, "/health", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["models"], 3);

    let (status, body) = call(Method::GET, "/models", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let models: Vec<ModelInfo> = serde_json::from_slice(&body).unwrap();
    assert_eq!(models.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(), ["evid", "judge", "prob"]);
    let judge = &models[1];
    assert_eq!(judge.task, Task::Judgment);
    assert_eq!(judge.case_type, CaseType::Custody);
    let catalog = CaseCatalogs::builtin(CaseType::Custody);
    let names: Vec<&str> = catalog.judgment.classes().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(judge.classes, names);
    assert_eq!(models[0].classes.len(), 8);
}

#[tokio::test]
async fn predict_judgment_with_evidence() {
    let body = json!({"model": "judge", "task": "judgment", "pleading": pleading(), "evidence_model": "evid"}).to_string();
    let (status, bytes) = post(body.clone()).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    let r: PredictResponse = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(r.output, OutputKind::Softmax);
    assert_eq!(r.probabilities.len(), 4);
    assert!((r.probabilities.iter().map(|p| p.probability).sum::<f64>() - 1.0).abs() < 1e-6);
    assert_eq!(r.evidence.unwrap().probabilities.len(), 8);
    assert!(r.n_tokens > 0);

    for _ in 0..3 {
        assert_eq!(post(body.clone()).await.1, bytes);
    }
}

#[tokio::test]
async fn predict_probability_is_sigmoid() {
    let c = &cases().cases[3];
    let body = json!({"model": "prob", "claim": c.claim, "answer": c.answer}).to_string();
    let (status, bytes) = post(body).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    let r: PredictResponse = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(r.task, Task::Probability);
    assert_eq!(r.output, OutputKind::Sigmoid);
    assert!(r.probabilities.iter().all(|p| p.probability > 0.0 && p.probability < 1.0));
}

#[tokio::test]
async fn error_statuses() {
    let cases = [
        (json!({"model": "nope", "pleading": "حضانة"}), StatusCode::NOT_FOUND, ErrorCode::NotFound),
        (json!({"model": "judge", "pleading": ""}), StatusCode::UNPROCESSABLE_ENTITY, ErrorCode::InvalidInput),
        (json!({"model": "judge", "pleading": "في من على ١٤٤١/٠١/٠١"}), StatusCode::UNPROCESSABLE_ENTITY, ErrorCode::InvalidInput),
        (json!({"model": "prob", "claim": "حضانة"}), StatusCode::UNPROCESSABLE_ENTITY, ErrorCode::InvalidInput),
        (json!({"model": "judge", "task": "probability", "pleading": "حضانة"}), StatusCode::CONFLICT, ErrorCode::TaskMismatch),
        (json!({"model": "judge", "pleading": "حضانة", "evidence_model": "judge"}), StatusCode::CONFLICT, ErrorCode::TaskMismatch),
        (json!({"model": "judge", "pleading": "حضانة", "extra": 1}), StatusCode::BAD_REQUEST, ErrorCode::BadRequest),
        (json!({"pleading": "حضانة"}), StatusCode::BAD_REQUEST, ErrorCode::BadRequest),
        (json!({"model": "judge", "task": "custody", "pleading": "حضانة"}), StatusCode::BAD_REQUEST, ErrorCode::BadRequest),
    ];
    for (body, status, code) in cases {
        let (got, bytes) = post(body.to_string()).await;
        assert_eq!(got, status, "{body}");
        let e = api_error(&bytes);
        assert_eq!(e.code, code, "{body}");
        assert!(!e.message.is_empty());
    }
}

#[tokio::test]
async fn routing_errors_are_structured() {
    let (status, bytes) = call(Method::GET, "/nope", Body::empty()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(api_error(&bytes).code, ErrorCode::NotFound);

    let (status, bytes) = call(Method::GET, "/predict", Body::empty()).await;
    assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED);
    assert_eq!(api_error(&bytes).code, ErrorCode::BadRequest);

    let (status, bytes) = post(vec![b' '; MAX_BODY_BYTES + 1]).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(api_error(&bytes).code, ErrorCode::BadRequest);
}

#[tokio::test]
async fn cors_preflight() {
    let req = Request::builder().method(Method::OPTIONS).uri("/predict").body(Body::empty()).unwrap();
    let resp = router(registry()).oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::NO_CONTENT);
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}

fn fuzz_corpus() -> Vec<Vec<u8>> {
    let p = pleading();
    let mut corpus: Vec<Vec<u8>> = [
        "", " ", "{", "}", "[]", "null", "0", "-1e999", "\"judge\"", "true", "{\"model\":", "{\"model\": null}",
        "{\"model\": 7, \"pleading\": \"x\"}", "{\"model\": \"judge\", \"pleading\": 5}", "{\"model\": \"judge\", \"pleading\": [\"a\"]}",
        "{\"model\": \"judge\", \"pleading\": \"\\ud800\"}", "{\"model\": \"judge\", \"pleading\": \"\\u0000\"}",
        "{\"model\": \"judge\", \"evidence_model\": 3, \"pleading\": \"حضانة\"}", "{\"model\": \"judge\", \"task\": null, \"pleading\": \"ً ٌ ٍ\"}",
        "{\"model\": \"judge\", \"pleading\": \"؟؟؟ ،،، ...\"}", "{\"model\": \"\", \"pleading\": \"حضانة\"}",
        "{\"model\": \"judge\"} trailing", "{\"model\": \"judge\", \"model\": \"prob\", \"pleading\": \"حضانة\"}",
    ]
    .iter()
    .map(|s| s.as_bytes().to_vec())
    .collect();
    corpus.push(vec![0xff, 0xfe, 0x00, 0x7b]);
    corpus.push(format!("{}1{}", "[".repeat(4096), "]".repeat(4096)).into_bytes());
    corpus.push(json!({"model": "judge", "pleading": "حضانة ".repeat(20_000)}).to_string().into_bytes());
    let full = json!({"model": "judge", "pleading": p}).to_string().into_bytes();
    let mut rng = RngState::new(17);
    for _ in 0..40 {
        let mut b = full.clone();
        match rng.below(3) {
            0 => b.truncate(rng.below(b.len())),
            1 => {
                let i = rng.below(b.len());
                b[i] = rng.next_u64() as u8;
            }
            _ => b = (0..rng.below(64)).map(|_| rng.next_u64() as u8).collect(),
        }
        corpus.push(b);
    }
    corpus
}

#[tokio::test]
async fn fuzz_corpus_gets_structured_answers() {
    for body in fuzz_corpus() {
        let (status, bytes) = post(body.clone()).await;
        if status == StatusCode::OK {
            let r: PredictResponse = serde_json::from_slice(&bytes).unwrap();
            assert_eq!(r.probabilities.len(), 4);
            continue;
        }
        assert!(status.is_client_error(), "{status} for {:?}", String::from_utf8_lossy(&body));
        let e = api_error(&bytes);
        assert!(!e.message.is_empty());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_agree() {
    let body = json!({"model": "judge", "pleading": pleading()}).to_string();
    let expected = post(body.clone()).await.1;
    let tasks: Vec<_> = (0..32).map(|_| tokio::spawn(post(body.clone()))).collect();
    for t in tasks {
        let (status, bytes) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        assert_eq!(bytes, expected);
    }
}
