use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ljp_core::app::{handle_predict, train_artifact, ArtifactSpec, ErrorCode, ModelArtifact, PredictRequest, PredictResponse, Registry};
use ljp_core::artext::preprocess;
use ljp_core::corpus::{
    generate_synthetic, load_cases, synthetic_embeddings, CaseCatalogs, CaseSet, CatalogFile, SynthSpec, Task,
};
use ljp_core::eval::{run_experiment, EvalError, ExperimentConfig};
use ljp_core::features::EmbeddingStore;
use ljp_core::pipeline::{row_name, Representation, StoreRef};
use ljp_core::RngState;
use serde::{Deserialize, Serialize};

use crate::args::{Command, Common, DataArgs, EvalArgs, PredictArgs, PreprocessArgs, SynthArgs, TrainArgs};
use crate::error::{CliError, CliResult};
use crate::server;

pub fn run(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(&a, out),
        Command::Preprocess(a) => preprocess_cmd(&a, out),
        Command::Train(a) => train(&a, out),
        Command::Grid(a) => grid(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Predict(a) => predict(&a, out),
        Command::Serve(a) => server::serve_blocking(&a),
    }
}

/// Reads the TOML config (defaults when absent) and applies `--seed`.
///
/// Relative paths inside the file resolve against the file's directory.
pub fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let body = fs::read_to_string(path)
                .map_err(|e| CliError::data(e).context(format!("cannot read config {}", path.display())))?;
            let mut cfg: ExperimentConfig = toml::from_str(&body)
                .map_err(|e| CliError::data(e).context(format!("invalid config {}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.embeddings = cfg.embeddings.map(|p| base.join(p));
            cfg.preprocess.stoplist = cfg.preprocess.stoplist.map(|p| base.join(p));
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_data(args: &DataArgs, cfg: &mut ExperimentConfig) -> CliResult<CaseSet> {
    if let Some(ct) = args.case_type {
        cfg.case_type = ct;
    }
    let catalogs = match &args.catalogs {
        Some(p) => CaseCatalogs::from_file(&CatalogFile::load(p)?, cfg.case_type, args.variant.as_deref())?,
        None => CaseCatalogs::builtin(cfg.case_type),
    };
    Ok(load_cases(&args.data, &catalogs)?)
}

fn load_store(path: Option<&Path>) -> CliResult<StoreRef> {
    let path = path.ok_or_else(|| CliError::data(EvalError::MissingEmbeddings))?;
    let store = EmbeddingStore::load(path)?;
    Ok(StoreRef { path: path.display().to_string(), store: Arc::new(store) })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::internal(e).context(format!("cannot create {}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::internal(e).context(format!("cannot write {}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(CliError::internal)
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    s.push('\n');
    Ok(s)
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(&a.common)?;
    let case_type = a.case_type.unwrap_or(cfg.case_type);
    let spec = SynthSpec::builtin(case_type, a.per_class);
    let cases = generate_synthetic(&spec, &CaseCatalogs::builtin(case_type), cfg.seed)?;
    write_file(&a.out, cases.to_jsonl().as_bytes())?;
    emit(out, &format!("wrote {} {case_type} cases to {}\n", cases.len(), a.out.display()))?;
    if let Some(path) = &a.embeddings_out {
        if a.dim == 0 {
            return Err(CliError::usage("--dim must be positive"));
        }
        let store = synthetic_embeddings(&spec, a.dim, RngState::derive_seed(cfg.seed, 1));
        write_file(path, store.to_text().as_bytes())?;
        emit(out, &format!("wrote {} vectors of dimension {} to {}\n", store.len(), a.dim, path.display()))?;
    }
    Ok(())
}

/// A line of `--data` input for commands that only need the text.
#[derive(Debug, Deserialize)]
struct TextRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    claim: String,
    #[serde(default)]
    answer: String,
    #[serde(default)]
    pleading: String,
}

fn read_text_records(path: &Path) -> CliResult<Vec<TextRecord>> {
    let f = fs::File::open(path).map_err(|e| CliError::data(e).context(format!("cannot open {}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(e).context(format!("{}:{}", path.display(), i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::data(e).context(format!("{}:{}: malformed record", path.display(), i + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

#[derive(Serialize)]
struct TokenRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    claim: Vec<String>,
    answer: Vec<String>,
    pleading: Vec<String>,
}

fn preprocess_cmd(a: &PreprocessArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(&a.common)?;
    let pre = cfg.preprocess.build()?;
    let body = match (&a.text, &a.data) {
        (Some(text), None) => {
            let tokens = preprocess(text, &pre).into_vec();
            serde_json::to_string(&serde_json::json!({ "tokens": tokens })).map_err(CliError::internal)? + "\n"
        }
        (None, Some(path)) => {
            let mut body = String::new();
            for r in read_text_records(path)? {
                let rec = TokenRecord {
                    id: r.id,
                    claim: preprocess(&r.claim, &pre).into_vec(),
                    answer: preprocess(&r.answer, &pre).into_vec(),
                    pleading: preprocess(&r.pleading, &pre).into_vec(),
                };
                body += &serde_json::to_string(&rec).map_err(CliError::internal)?;
                body.push('\n');
            }
            body
        }
        _ => return Err(CliError::usage("preprocess needs --text or --data")),
    };
    match &a.out {
        Some(path) => write_file(path, body.as_bytes()),
        None => emit(out, &body),
    }
}

fn fit(a: &TrainArgs, id: String) -> CliResult<(ModelArtifact, ljp_core::pipeline::FitInfo)> {
    let mut cfg = load_config(&a.common)?;
    let cases = load_data(&a.data, &mut cfg)?;
    let task = a.task.unwrap_or(cfg.task);
    let store = match a.representation {
        Representation::Word2vec => Some(load_store(a.embeddings.as_deref().or(cfg.embeddings.as_deref()))?),
        Representation::Tfidf => None,
    };
    let spec = ArtifactSpec {
        id,
        task,
        family: a.family,
        representation: a.representation,
        preprocess: &cfg.preprocess,
        settings: &cfg.train,
        seed: cfg.seed,
        store: store.as_ref(),
    };
    log::info!("fitting {} for {task} on {} cases", row_name(a.family, a.representation), cases.len());
    Ok(train_artifact(&spec, &cases)?)
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = a.out.as_ref().ok_or_else(|| CliError::usage("train needs --out <artifact path>"))?;
    let id = match &a.id {
        Some(id) => id.clone(),
        None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into()),
    };
    let (artifact, info) = fit(a, id)?;
    write_file(path, &artifact.to_bytes()?)?;
    let summary = serde_json::json!({
        "id": artifact.id,
        "task": artifact.task(),
        "case_type": artifact.case_type,
        "row": row_name(a.family, a.representation),
        "classes": artifact.catalog.len(),
        "chosen": info.chosen,
        "best_epoch": info.history.and_then(|h| h.best_epoch),
        "artifact": path.display().to_string(),
    });
    emit(out, &to_json(&summary)?)
}

fn grid(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.family.is_neural() {
        return Err(CliError::usage(format!("grid search covers svm and lr, not {}", a.family)));
    }
    let (artifact, info) = fit(a, a.id.clone().unwrap_or_else(|| "grid".into()))?;
    let report = serde_json::json!({
        "row": row_name(a.family, a.representation),
        "task": artifact.task(),
        "chosen": info.chosen,
        "grid": info.grid,
    });
    let body = to_json(&report)?;
    match &a.out {
        Some(path) => write_file(path, body.as_bytes()),
        None => emit(out, &body),
    }
}

/// `report.json` → `report.timings.json`.
pub fn timings_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.timings.json"))
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(task) = a.task {
        cfg.task = task;
    }
    if a.embeddings.is_some() {
        cfg.embeddings = a.embeddings.clone();
    }
    let cases = load_data(&a.data, &mut cfg)?;
    let store = if cfg.needs_embeddings() { Some(load_store(cfg.embeddings.as_deref())?) } else { None };
    let (report, timings) = run_experiment(&cfg, &cases, store.as_ref())?;
    match &a.out {
        Some(path) => {
            write_file(path, report.to_json().as_bytes())?;
            write_file(&timings_path(path), to_json(&timings)?.as_bytes())?;
            emit(out, &report.render_table())
        }
        None => {
            eprint!("{}", report.render_table());
            emit(out, &report.to_json())
        }
    }
}

#[derive(Serialize)]
struct PredictLine {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(flatten)]
    response: PredictResponse,
}

fn api_error(e: ljp_core::app::ApiError) -> CliError {
    match e.code {
        ErrorCode::Internal => CliError::internal(e),
        _ => CliError::data(e),
    }
}

fn predict(a: &PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.data.is_none() && a.pleading.is_none() && a.claim.is_none() && a.answer.is_none() {
        return Err(CliError::usage("predict needs --data or at least one of --pleading, --claim, --answer"));
    }
    let mut registry = Registry::new();
    let model = ModelArtifact::load(&a.model, a.embeddings.as_deref())?;
    let model_id = model.id.clone();
    registry.insert(model)?;
    let evidence_id = match &a.evidence_model {
        Some(p) => {
            let ev = ModelArtifact::load(p, a.embeddings.as_deref())?;
            if ev.task() != Task::Evidence {
                return Err(CliError::data(anyhow::anyhow!("{} is a {} model, not an evidence model", p.display(), ev.task())));
            }
            let id = ev.id.clone();
            registry.insert(ev)?;
            Some(id)
        }
        None => None,
    };
    let request = |claim: String, answer: String, pleading: String| PredictRequest {
        model: model_id.clone(),
        task: None,
        claim,
        answer,
        pleading,
        evidence_model: evidence_id.clone(),
    };
    let body = match &a.data {
        Some(path) => {
            let mut body = String::new();
            for r in read_text_records(path)? {
                let label = r.id.clone().unwrap_or_default();
                let response = handle_predict(&registry, &request(r.claim, r.answer, r.pleading))
                    .map_err(|e| api_error(e).context(format!("record {label:?}")))?;
                body += &serde_json::to_string(&PredictLine { id: r.id, response }).map_err(CliError::internal)?;
                body.push('\n');
            }
            body
        }
        None => {
            let req = request(
                a.claim.clone().unwrap_or_default(),
                a.answer.clone().unwrap_or_default(),
                a.pleading.clone().unwrap_or_default(),
            );
            to_json(&handle_predict(&registry, &req).map_err(api_error)?)?
        }
    };
    match &a.out {
        Some(path) => write_file(path, body.as_bytes()),
        None => emit(out, &body),
    }
}

