//! `swapbench` command-line entry point.
//!
//! Usage errors exit with 2, failed runs with 1 after printing a JSON error
//! object on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use swapbench::transform::SwapMode;
use swapbench::Backend;

#[derive(Parser, Debug)]
#[command(name = "swapbench", version, about = "Builtin identifier swap datasets and evaluation")]
struct Cli {
    /// Emit logs as JSON lines on stderr.
    #[arg(long, global = true)]
    log_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search the code host for Python repositories and snapshot manifests.
    Crawl(CrawlArgs),
    /// Shallow-clone every repository of a manifest snapshot.
    Fetch(FetchArgs),
    /// List Python files under a directory tree.
    Enumerate(EnumerateArgs),
    /// Write a deterministic synthetic corpus tree.
    SynthCorpus(SynthArgs),
    /// Build a classification dataset from enumerated files.
    Generate(GenerateArgs),
    /// Re-check every example of a dataset.
    Validate(ValidateArgs),
    /// Score a dataset with the completion-likelihood protocol.
    Eval(EvalArgs),
    /// Score a dataset with the two-ordering chat protocol.
    ChatEval(ChatEvalArgs),
    /// Correlate log size with log loss across model families.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Serialize)]
struct CrawlArgs {
    #[arg(long, default_value_t = 100)]
    min_stars: u64,
    #[arg(long, default_value_t = 200)]
    max_size_mb: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "https://api.github.com")]
    api_base: String,
    /// Host part of manifest identifiers.
    #[arg(long, default_value = "github.com")]
    host: String,
    /// Keep repositories whose README lacks the license mention.
    #[arg(long)]
    no_license_filter: bool,
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Requests per second.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
}

#[derive(Args, Debug, Serialize)]
struct FetchArgs {
    #[arg(long)]
    manifests: PathBuf,
    #[arg(long)]
    dest: PathBuf,
    /// Replaces `https://host` in clone URLs, e.g. a local mirror.
    #[arg(long)]
    clone_base: Option<String>,
    #[arg(long, default_value_t = 8)]
    workers: usize,
}

#[derive(Args, Debug, Serialize)]
struct EnumerateArgs {
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory levels below the root that name a repository (3 for a
    /// `fetch` destination, 2 for `synth-corpus`, 0 for a single checkout).
    #[arg(long, default_value_t = 0)]
    repo_depth: usize,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    repos: usize,
    #[arg(long, default_value_t = 4)]
    modules: usize,
    #[arg(long, default_value_t = 8)]
    functions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long)]
    files: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SwapMode::Builtin)]
    mode: SwapMode,
    #[arg(long)]
    out: PathBuf,
    /// Skip functions that call eval, exec, getattr, globals, locals or vars.
    #[arg(long)]
    exclude_dynamic: bool,
    /// Builtin catalog file (one name per line); defaults to the embedded one.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    /// Registry name or `family/name`; unknown names need `--backend`.
    #[arg(long)]
    model: String,
    #[arg(long)]
    backend: Option<Backend>,
    /// JSON list of model specs replacing or extending the built-in registry.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    api_base: String,
    /// Requests per second for remote backends.
    #[arg(long, default_value_t = 5.0)]
    rate: f64,
    #[arg(long, default_value_t = 8)]
    workers: usize,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Divide class scores by their token counts.
    #[arg(long)]
    length_normalize: bool,
    /// Enumerated files to train the mock n-gram on; functions behind
    /// dataset examples are held out.
    #[arg(long)]
    ngram_train: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    ngram_order: usize,
    #[arg(long, default_value_t = 0.01)]
    ngram_k: f64,
    /// Vocabulary size of the uniform mock.
    #[arg(long, default_value_t = 256)]
    vocab: u32,
}

#[derive(Args, Debug, Serialize)]
struct ChatEvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// `openai` or `anthropic` request shape.
    #[arg(long, default_value = "openai")]
    format: String,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    /// Directory of `eval` reports (`*.json`).
    #[arg(long)]
    reports: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: PathBuf,
}

fn init_logging(json: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.log_json);
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let failure = commands::Failure::from(e);
            eprintln!("{}", serde_json::to_string(&failure).expect("failure serializes"));
            ExitCode::from(1)
        }
    }
}
