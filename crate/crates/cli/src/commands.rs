//! Subcommand implementations.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use swapbench::artifact::{jsonl_bytes, read_jsonl, write_atomic, ArtifactHeader, TOOL_VERSION};
use swapbench::corpus::{
    crawl_repositories, enumerate_sources, fetch_repositories, CrawlConfig, FetchStatus, GithubApi,
    RepoManifest, SourceFile,
};
use swapbench::dataset::{deserialize, functions_from_files, generate, serialize, validate, GenerationConfig};
use swapbench::eval::{
    held_out_texts, run_chat_eval, run_eval, ChatApi, ChatFormat, CompletionApi, EvalOptions, NgramModel,
    Registry, Scorer, UniformModel,
};
use swapbench::http::{ClientConfig, DiskCache, HttpClient, RateLimiter};
use swapbench::pyast::BuiltinCatalog;
use swapbench::stats::{aggregate, emit_plot_data, scaling_reports};
use swapbench::synth::{write_corpus, SynthConfig};
use swapbench::{Backend, EvalReport, ModelSpec};

use crate::{
    AnalyzeArgs, ChatEvalArgs, Command, CrawlArgs, EnumerateArgs, EvalArgs, FetchArgs, GenerateArgs, ModelArgs,
    SynthArgs, ValidateArgs,
};

/// A run that finished but left items behind.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct ItemFailures {
    pub message: String,
    pub failed: Vec<Value>,
}

#[derive(Serialize)]
pub struct Failure {
    pub error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<Value>,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<ItemFailures>() {
            Ok(f) => Failure {
                error: f.message,
                failed: f.failed,
            },
            Err(e) => Failure {
                error: format!("{e:#}"),
                failed: Vec::new(),
            },
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Crawl(a) => crawl(a),
        Command::Fetch(a) => fetch(a),
        Command::Enumerate(a) => enumerate(a),
        Command::SynthCorpus(a) => synth_corpus(a),
        Command::Generate(a) => generate_cmd(a),
        Command::Validate(a) => validate_cmd(a),
        Command::Eval(a) => eval(a),
        Command::ChatEval(a) => chat_eval(a),
        Command::Analyze(a) => analyze(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Report JSON: tool version and config first, then the report's fields.
fn report_json<T: Serialize>(artifact: &str, config: &impl Serialize, report: &T) -> Result<Vec<u8>> {
    let mut obj = serde_json::Map::new();
    obj.insert("artifact".into(), json!(artifact));
    obj.insert("tool_version".into(), json!(TOOL_VERSION));
    obj.insert("config".into(), serde_json::to_value(config)?);
    match serde_json::to_value(report)? {
        Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("report".into(), other);
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(obj))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn http_client(rate: f64) -> Result<HttpClient> {
    let limiter = if rate > 0.0 {
        RateLimiter::new(rate, rate.ceil().max(1.0) as u32)
    } else {
        RateLimiter::unlimited()
    };
    Ok(HttpClient::new(ClientConfig::default(), Arc::new(limiter))?.with_cache(DiskCache::from_env()))
}

fn crawl(a: CrawlArgs) -> Result<()> {
    let client = http_client(a.rate)?;
    if client.token().is_none() {
        tracing::warn!("no API token set; anonymous search limits apply");
    }
    let api = GithubApi::new(client, a.api_base.clone());
    let config = CrawlConfig {
        host: a.host.clone(),
        min_stars: a.min_stars,
        max_size_kb: a.max_size_mb.saturating_mul(1024),
        require_license: !a.no_license_filter,
        workers: a.workers,
        retrieval_date: chrono::Utc::now().date_naive(),
    };
    let (manifests, report) = crawl_repositories(&api, &config)?;
    tracing::info!(manifests = manifests.len(), queries = report.queries, "crawl finished");
    let header = ArtifactHeader::new("manifests", serde_json::to_value(&a)?, serde_json::to_value(&report)?);
    write(&a.out, &jsonl_bytes(&header, &manifests))?;
    if !report.truncated_ranges.is_empty() {
        return Err(ItemFailures {
            message: format!(
                "{} search ranges exceeded the result cap; the snapshot is incomplete",
                report.truncated_ranges.len()
            ),
            failed: report.truncated_ranges.iter().map(|r| json!(r)).collect(),
        }
        .into());
    }
    Ok(())
}

fn fetch(a: FetchArgs) -> Result<()> {
    let (_, manifests): (_, Vec<RepoManifest>) = read_jsonl(&read(&a.manifests)?)?;
    let outcomes = fetch_repositories(&manifests, &a.dest, a.clone_base.as_deref(), a.workers)?;
    let failed: Vec<Value> = outcomes
        .iter()
        .filter(|o| matches!(o.status, FetchStatus::Failed(_)))
        .map(|o| serde_json::to_value(o).expect("outcome serializes"))
        .collect();
    tracing::info!(repos = outcomes.len(), failed = failed.len(), "fetch finished");
    if !failed.is_empty() {
        return Err(ItemFailures {
            message: format!("{} of {} clones failed", failed.len(), outcomes.len()),
            failed,
        }
        .into());
    }
    Ok(())
}

fn enumerate(a: EnumerateArgs) -> Result<()> {
    let e = enumerate_sources(&a.root, a.repo_depth)?;
    let unparsable = e.files.iter().filter(|f| !f.parse_ok).count();
    tracing::info!(files = e.files.len(), unparsable, skipped = e.skipped.len(), "enumerated");
    let summary = json!({
        "files": e.files.len(),
        "unparsable": unparsable,
        "skipped": e.skipped,
    });
    let header = ArtifactHeader::new("files", serde_json::to_value(&a)?, summary);
    write(&a.out, &jsonl_bytes(&header, &e.files))
}

fn synth_corpus(a: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        repos: a.repos,
        modules_per_repo: a.modules,
        functions_per_module: a.functions,
        seed: a.seed,
    };
    let n = write_corpus(&a.out, &config).with_context(|| format!("writing {}", a.out.display()))?;
    tracing::info!(files = n, root = %a.out.display(), "synthetic corpus written");
    Ok(())
}

fn catalog(path: Option<&Path>) -> Result<BuiltinCatalog> {
    Ok(match path {
        Some(p) => BuiltinCatalog::from_file(p)?,
        None => BuiltinCatalog::embedded(),
    })
}

fn generate_cmd(a: GenerateArgs) -> Result<()> {
    let (_, files): (_, Vec<SourceFile>) = read_jsonl(&read(&a.files)?)?;
    let catalog = catalog(a.catalog.as_deref())?;
    let config = GenerationConfig {
        exclude_dynamic: a.exclude_dynamic,
        ..GenerationConfig::new(a.n, a.seed, a.mode, &catalog)
    };
    let ds = generate(&files, &catalog, &config);
    tracing::info!(
        examples = ds.examples.len(),
        functions = ds.summary.functions,
        buildable = ds.summary.buildable,
        "dataset generated"
    );
    write(&a.out, &serialize(&ds))
}

fn validate_cmd(a: ValidateArgs) -> Result<()> {
    let report = validate(&read(&a.dataset)?);
    let counts: serde_json::Map<String, Value> = report
        .counts()
        .into_iter()
        .map(|(k, v)| (serde_json::to_value(k).expect("kind").as_str().unwrap_or_default().to_owned(), json!(v)))
        .collect();
    println!(
        "{}",
        json!({"examples": report.examples, "violations": report.violations.len(), "counts": counts})
    );
    if !report.is_clean() {
        return Err(ItemFailures {
            message: format!("{} violation(s) in {}", report.violations.len(), a.dataset.display()),
            failed: report
                .violations
                .iter()
                .map(|v| serde_json::to_value(v).expect("violation serializes"))
                .collect(),
        }
        .into());
    }
    Ok(())
}

fn resolve_model(m: &ModelArgs) -> Result<ModelSpec> {
    let mut registry = Registry::default();
    if let Some(p) = &m.registry {
        registry = registry.with_overrides(&read(p)?)?;
    }
    match (registry.get(&m.model), m.backend) {
        (Ok(spec), None) => Ok(spec.clone()),
        (Ok(spec), Some(b)) => Ok(ModelSpec {
            backend: b,
            ..spec.clone()
        }),
        (Err(_), Some(b)) => {
            let (family, name) = m.model.split_once('/').unwrap_or(("custom", m.model.as_str()));
            Ok(ModelSpec::new(name, family, None, b))
        }
        (Err(e), None) => Err(e.into()),
    }
}

fn load_dataset(path: &Path) -> Result<swapbench::Dataset> {
    let ds = deserialize(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if ds.examples.is_empty() {
        bail!("{} has no examples", path.display());
    }
    Ok(ds)
}

fn eval(a: EvalArgs) -> Result<()> {
    let spec = resolve_model(&a.model)?;
    let ds = load_dataset(&a.dataset)?;
    let mut extra = json!({});
    let scorer: Box<dyn Scorer> = match spec.backend {
        Backend::MockUniform => Box::new(UniformModel { vocab: a.vocab }),
        Backend::MockNgram => {
            let path = a
                .ngram_train
                .as_ref()
                .context("the mock-ngram backend needs --ngram-train FILES")?;
            let (_, files): (_, Vec<SourceFile>) = read_jsonl(&read(path)?)?;
            let pool = functions_from_files(&files, &BuiltinCatalog::embedded());
            let texts = held_out_texts(&pool.functions, &ds.examples);
            let model = NgramModel::train(&texts, a.ngram_order, a.ngram_k)?;
            extra = json!({"training_functions": texts.len(), "model_hash": model.model_hash()});
            Box::new(model)
        }
        Backend::ApiCompletion => Box::new(CompletionApi::new(http_client(a.model.rate)?, &a.model.api_base, &spec.name)),
        Backend::ApiChat => bail!("{} is a chat model; use chat-eval", spec.name),
    };
    let options = EvalOptions {
        length_normalize: a.length_normalize,
        workers: a.model.workers,
    };
    let report = run_eval(scorer.as_ref(), &spec, &ds.examples, options)?;
    tracing::info!(
        model = %spec.name,
        mean_loss = report.mean_loss,
        accuracy = report.accuracy,
        failures = report.failures.len(),
        "evaluation finished"
    );
    let config = json!({"args": a, "model": spec, "dataset": ds.config, "backend_details": extra});
    write(&a.out, &report_json("eval-report", &config, &report)?)?;
    if report.unreliable {
        return Err(ItemFailures {
            message: format!(
                "report is unreliable: {} failure(s) over {} example(s)",
                report.failures.len(),
                ds.examples.len()
            ),
            failed: report.failures.iter().map(|f| json!(f)).collect(),
        }
        .into());
    }
    Ok(())
}

fn chat_eval(a: ChatEvalArgs) -> Result<()> {
    let spec = resolve_model(&a.model)?;
    let format: ChatFormat = a.format.parse().map_err(anyhow::Error::msg)?;
    let ds = load_dataset(&a.dataset)?;
    let api = ChatApi::new(http_client(a.model.rate)?, &a.model.api_base, &spec.name, format);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.model.workers.max(1))
        .build()?;
    let report = run_chat_eval(&api, &spec, &ds.examples, a.temperature, &pool);
    tracing::info!(
        model = %spec.name,
        correct = report.correct_rate,
        invalid = report.invalid_rate,
        transport = report.invalid_transport,
        "chat evaluation finished"
    );
    let config = json!({"args": a, "model": spec, "dataset": ds.config});
    write(&a.out, &report_json("chat-report", &config, &report)?)?;
    if report.invalid_transport * 10 > report.trials {
        bail!(
            "{} of {} trials failed in transport",
            report.invalid_transport,
            report.trials
        );
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(&a.reports)
        .with_context(|| format!("listing {}", a.reports.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    entries.sort();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for path in &entries {
        let value: Value = match serde_json::from_str(&read(path)?) {
            Ok(v) => v,
            Err(e) => {
                skipped.push(json!({"path": path, "reason": e.to_string()}));
                continue;
            }
        };
        if value["artifact"] != "eval-report" {
            continue;
        }
        let report: EvalReport = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
        if report.unreliable {
            tracing::warn!(model = %report.model.name, "unreliable report included");
        }
        match aggregate(&report) {
            Ok(p) => points.push(p),
            Err(e) => skipped.push(json!({"path": path, "reason": e.to_string()})),
        }
    }
    if points.is_empty() {
        bail!("no usable eval reports under {}", a.reports.display());
    }
    let (reports, not_reported) = scaling_reports(&points);
    let mut csv = Vec::new();
    emit_plot_data(&reports, &mut csv)?;
    write(&a.out, &csv)?;
    let summary = json!({
        "families": reports,
        "not_reported": not_reported.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "skipped_files": skipped,
    });
    write(&a.summary, &report_json("scaling", &a, &summary)?)
}
