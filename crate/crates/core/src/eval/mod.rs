//! Scoring classification examples with language models.
//!
//! The completion protocol compares the total log-likelihood of the two
//! continuations; the chat protocol lives in [`chat`].

pub mod api;
pub mod chat;
pub mod mock;
pub mod registry;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use api::{ChatApi, ChatFormat, CompletionApi};
pub use chat::{
    chat_classify, chat_messages, parse_chat_answer, run_chat_eval, ChatAnswer, ChatBackend,
    ChatMessage, ChatReport, ChatResult, ChatTrial, ScriptedChat, TrialCategory,
};
pub use mock::{NgramError, NgramModel, UniformModel};
pub use registry::{Backend, ModelSpec, Registry, RegistryError};

use crate::dataset::ClassificationExample;
use crate::http::HttpError;
use crate::pyast::{unparse_stmts, SourceFunction};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Score {
    pub logp: f64,
    pub tokens: usize,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ScoreError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("token {token:?} straddles the prompt/continuation boundary at character {offset}")]
    Boundary { offset: usize, token: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl ScoreError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, ScoreError::Http(e) if e.is_retriable())
    }
}

pub trait Scorer: Sync {
    /// Log-likelihood of `continuation` given `prompt`.
    fn score(&self, prompt: &str, continuation: &str) -> Result<Score, ScoreError>;
}

pub fn score_continuation(model: &dyn Scorer, prompt: &str, continuation: &str) -> Result<f64, ScoreError> {
    model.score(prompt, continuation).map(|s| s.logp)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub id: String,
    pub logp_good: f64,
    pub logp_bad: f64,
    pub tokens_good: usize,
    pub tokens_bad: usize,
    /// `−ln P(good)` under the two-class posterior.
    pub loss: f64,
    pub posterior_good: f64,
    pub posterior_bad: f64,
    pub correct: bool,
}

impl ExampleResult {
    /// Ties count as incorrect.
    pub fn from_logps(id: &str, logp_good: f64, logp_bad: f64) -> Self {
        let d = logp_bad - logp_good;
        Self {
            id: id.to_owned(),
            logp_good,
            logp_bad,
            tokens_good: 0,
            tokens_bad: 0,
            loss: softplus(d),
            posterior_good: (-softplus(d)).exp(),
            posterior_bad: (-softplus(-d)).exp(),
            correct: logp_good > logp_bad,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Divide each class score by its token count.
    pub length_normalize: bool,
    pub workers: usize,
}

fn class_score(s: Score, normalize: bool) -> f64 {
    if normalize && s.tokens > 0 {
        s.logp / s.tokens as f64
    } else {
        s.logp
    }
}

pub fn classify_example(
    model: &dyn Scorer,
    ex: &ClassificationExample,
    length_normalize: bool,
) -> Result<ExampleResult, ScoreError> {
    let good = model.score(&ex.prompt, &ex.good)?;
    let bad = model.score(&ex.prompt, &ex.bad)?;
    let mut r = ExampleResult::from_logps(
        &ex.id,
        class_score(good, length_normalize),
        class_score(bad, length_normalize),
    );
    r.tokens_good = good.tokens;
    r.tokens_bad = bad.tokens;
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleFailure {
    pub id: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelSpec,
    pub length_normalize: bool,
    pub results: Vec<ExampleResult>,
    pub failures: Vec<ExampleFailure>,
    pub mean_loss: f64,
    pub stderr_loss: f64,
    pub accuracy: f64,
    /// More than 10% of examples failed, or there are fewer than two results.
    pub unreliable: bool,
}

/// Mean and sample standard error (n − 1 denominator); 0 stderr for one value.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl EvalReport {
    pub fn from_results(
        model: ModelSpec,
        length_normalize: bool,
        results: Vec<ExampleResult>,
        failures: Vec<ExampleFailure>,
    ) -> Self {
        let losses: Vec<f64> = results.iter().map(|r| r.loss).collect();
        let (mean_loss, stderr_loss) = mean_stderr(&losses);
        let accuracy = if results.is_empty() {
            f64::NAN
        } else {
            results.iter().filter(|r| r.correct).count() as f64 / results.len() as f64
        };
        let total = results.len() + failures.len();
        let unreliable = results.len() < 2 || failures.len() * 10 > total;
        Self {
            model,
            length_normalize,
            results,
            failures,
            mean_loss,
            stderr_loss,
            accuracy,
            unreliable,
        }
    }
}

/// Scores every example with `workers` threads; results keep dataset order.
pub fn run_eval(
    model: &dyn Scorer,
    spec: &ModelSpec,
    examples: &[ClassificationExample],
    options: EvalOptions,
) -> Result<EvalReport, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()?;
    let outcomes: Vec<Result<ExampleResult, ExampleFailure>> = pool.install(|| {
        examples
            .par_iter()
            .map(|ex| {
                classify_example(model, ex, options.length_normalize).map_err(|e| ExampleFailure {
                    id: ex.id.clone(),
                    error: e.to_string(),
                })
            })
            .collect()
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(EvalReport::from_results(
        spec.clone(),
        options.length_normalize,
        results,
        failures,
    ))
}

/// Source text of an extracted function as it appears without any swap:
/// decorators, `def` line, docstring and body.
pub fn function_text(f: &SourceFunction) -> Option<String> {
    let mut text = String::new();
    for d in &f.decorators {
        text.push_str(d);
        text.push('\n');
    }
    text.push_str(&f.signature_text);
    text.push_str("\n    ");
    text.push_str(&f.docstring);
    text.push('\n');
    text.push_str(&unparse_stmts(&f.body, 1).ok()?);
    Some(text)
}

/// Texts of `functions` minus those behind any of `examples`, so a model
/// trained on them never sees an evaluated function.
pub fn held_out_texts(functions: &[SourceFunction], examples: &[ClassificationExample]) -> Vec<String> {
    let held: HashSet<(&str, &str, &str, usize)> = examples
        .iter()
        .map(|e| (e.origin.repo.as_str(), e.origin.path.as_str(), e.origin.name.as_str(), e.origin.line))
        .collect();
    functions
        .iter()
        .filter(|f| !held.contains(&(f.origin.repo.as_str(), f.origin.path.as_str(), f.name.as_str(), f.line)))
        .filter_map(function_text)
        .collect()
}

pub fn train_ngram_model(corpus_texts: &[String], order: usize, smoothing_k: f64) -> Result<NgramModel, NgramError> {
    NgramModel::train(corpus_texts, order, smoothing_k)
}
