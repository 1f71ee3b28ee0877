use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ljp_core::corpus::{CaseType, Task};
use ljp_core::pipeline::{ModelFamily, Representation};

#[derive(Debug, Parser)]
#[command(name = "ljp", version, about = "Arabic legal-judgment prediction: data, training, evaluation and serving")]
pub struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled corpus (and optionally matching word vectors).
    Synth(SynthArgs),
    /// Print the token lists the pipeline sees for a corpus or a text.
    Preprocess(PreprocessArgs),
    /// Fit one model and save it as an artifact.
    Train(TrainArgs),
    /// Run model selection for a classical family and report every grid point.
    Grid(TrainArgs),
    /// Split, fit and score every configured row; print the results table.
    Eval(EvalArgs),
    /// Predict with a saved artifact.
    Predict(PredictArgs),
    /// Serve saved artifacts over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Cases, one JSON record per line.
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides the config case type.
    #[arg(long)]
    pub case_type: Option<CaseType>,
    /// Label catalog file; the bundled catalogs when absent.
    #[arg(long)]
    pub catalogs: Option<PathBuf>,
    /// Judgment catalog variant in the catalog file.
    #[arg(long, requires = "catalogs")]
    pub variant: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub case_type: Option<CaseType>,
    /// Cases per judgment class.
    #[arg(long, default_value_t = 25)]
    pub per_class: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write word vectors for the synthetic vocabulary here.
    #[arg(long)]
    pub embeddings_out: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cases, one JSON object per line; only `id` and the text fields are read.
    #[arg(long, conflicts_with = "text")]
    pub data: Option<PathBuf>,
    /// A single text to preprocess.
    #[arg(long)]
    pub text: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_family)]
    pub family: ModelFamily,
    #[arg(long, value_parser = parse_representation, default_value = "tfidf")]
    pub representation: Representation,
    /// Overrides the config task.
    #[arg(long)]
    pub task: Option<Task>,
    /// Word-vector file; overrides the config.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Model id; the output file stem when absent.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Report file; a `.timings.json` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Artifact to predict with.
    #[arg(long)]
    pub model: PathBuf,
    /// Evidence artifact run on the same pleading.
    #[arg(long)]
    pub evidence_model: Option<PathBuf>,
    /// Word-vector file for Word2Vec artifacts; the recorded path when absent.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Cases to predict, one JSON object per line with `id`, `claim`, `answer`, `pleading`.
    #[arg(long, conflicts_with_all = ["pleading", "claim", "answer"])]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub pleading: Option<String>,
    #[arg(long)]
    pub claim: Option<String>,
    #[arg(long)]
    pub answer: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long = "artifact", required = true)]
    pub artifacts: Vec<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<ModelFamily, String> {
    ModelFamily::ALL
        .into_iter()
        .find(|f| f.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown model family {s:?} (expected svm|lr|lstm|bilstm)"))
}

fn parse_representation(s: &str) -> Result<Representation, String> {
    match s.to_ascii_lowercase().as_str() {
        "tfidf" => Ok(Representation::Tfidf),
        "word2vec" | "w2v" => Ok(Representation::Word2vec),
        _ => Err(format!("unknown representation {s:?} (expected tfidf|word2vec)")),
    }
}
