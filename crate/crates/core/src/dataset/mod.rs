//! Classification examples: a swap statement and function header as the
//! prompt, the original body as the "bad" class and the swapped body as the
//! "good" one.

mod validate;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use validate::{validate, ValidationReport, Violation, ViolationKind};

use crate::artifact::{jsonl_bytes, split_jsonl, ArtifactHeader};
use crate::corpus::SourceFile;
use crate::pyast::{
    collect_usage, extract_with_report, parse_module, unparse_stmts, BuiltinCatalog,
    DynamicAccess, FunctionOrigin, SourceFunction,
};
use crate::rng::{derive_u64, DetRng, RNG_VERSION};
use crate::transform::{apply_permutation, blocking_site, choose_swap, render_swap_statement, SwapMode, SwapSpec};

pub const DATASET_ARTIFACT: &str = "dataset";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    UnparsableFile,
    NoDocstring,
    #[serde(rename = "fewer-than-2-builtins")]
    FewerThanTwoBuiltins,
    #[serde(rename = "fewer-than-2-toplevel")]
    FewerThanTwoToplevel,
    SwapTargetUnreferenced,
    ShadowedSwapTarget,
    UnparseFailure,
    DynamicAccess,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnparsableFile => "unparsable-file",
            Self::NoDocstring => "no-docstring",
            Self::FewerThanTwoBuiltins => "fewer-than-2-builtins",
            Self::FewerThanTwoToplevel => "fewer-than-2-toplevel",
            Self::SwapTargetUnreferenced => "swap-target-unreferenced",
            Self::ShadowedSwapTarget => "shadowed-swap-target",
            Self::UnparseFailure => "unparse-failure",
            Self::DynamicAccess => "dynamic-access",
        }
    }
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExampleOrigin {
    pub repo: String,
    pub path: String,
    pub name: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassificationExample {
    pub id: String,
    pub prompt: String,
    /// The original body.
    pub bad: String,
    /// The body with the swap applied.
    pub good: String,
    /// Always sorted.
    pub swap: SwapSpec,
    pub mode: SwapMode,
    pub origin: ExampleOrigin,
    pub function_index: usize,
    /// Position of `good` in [`Self::classes`].
    pub answer_index: usize,
    pub dynamic_access: BTreeSet<DynamicAccess>,
}

impl ClassificationExample {
    pub fn classes(&self) -> [&str; 2] {
        if self.answer_index == 0 {
            [&self.good, &self.bad]
        } else {
            [&self.bad, &self.good]
        }
    }
}

/// What makes an example's id and class order.
#[derive(Clone, Copy, Debug)]
pub struct ExampleKey<'a> {
    pub corpus_hash: &'a str,
    pub function_index: usize,
    /// The user-facing dataset seed.
    pub seed: u64,
}

impl ExampleKey<'_> {
    pub fn id(&self) -> String {
        let short = &self.corpus_hash[..self.corpus_hash.len().min(16)];
        format!("{short}-{:06}-{}", self.function_index, self.seed)
    }

    /// Seed handed to `choose_swap` for this function.
    pub fn swap_seed(&self) -> u64 {
        derive_u64(&[
            "function-seed".into(),
            self.corpus_hash.into(),
            (self.function_index as u64).into(),
            self.seed.into(),
        ])
    }

    pub fn answer_index(&self) -> usize {
        let mut rng = DetRng::new(&[
            "class-order".into(),
            self.corpus_hash.into(),
            (self.function_index as u64).into(),
            self.seed.into(),
        ]);
        usize::from(rng.coin())
    }
}

/// Swap statement, decorator lines, `def` line and docstring line.
pub fn render_prompt(f: &SourceFunction, s: &SwapSpec) -> String {
    let mut prompt = render_swap_statement(s);
    for d in &f.decorators {
        prompt.push_str(d);
        prompt.push('\n');
    }
    prompt.push_str(&f.signature_text);
    prompt.push_str("\n    ");
    prompt.push_str(&f.docstring);
    prompt.push('\n');
    prompt
}

pub fn build_example(
    f: &SourceFunction,
    s: &SwapSpec,
    mode: SwapMode,
    key: &ExampleKey<'_>,
) -> Result<ClassificationExample, SkipReason> {
    let s = s.sorted();
    for name in [&s.a, &s.b] {
        if blocking_site(f, name, mode).is_some() {
            return Err(SkipReason::ShadowedSwapTarget);
        }
    }
    let reads = collect_usage(&f.body);
    if ![&s.a, &s.b].iter().all(|n| reads.read_count(n) > 0) {
        return Err(SkipReason::SwapTargetUnreferenced);
    }
    let swapped = apply_permutation(&f.body, &s.as_permutation())
        .map_err(|_| SkipReason::ShadowedSwapTarget)?;
    let bad = unparse_stmts(&f.body, 1).map_err(|_| SkipReason::UnparseFailure)?;
    let good = unparse_stmts(&swapped, 1).map_err(|_| SkipReason::UnparseFailure)?;
    let prompt = render_prompt(f, &s);
    if good == bad {
        return Err(SkipReason::UnparseFailure);
    }
    for class in [&bad, &good] {
        if parse_module(&format!("{prompt}{class}")).is_err() {
            return Err(SkipReason::UnparseFailure);
        }
    }
    Ok(ClassificationExample {
        id: key.id(),
        prompt,
        bad,
        good,
        swap: s,
        mode,
        origin: ExampleOrigin {
            repo: f.origin.repo.clone(),
            path: f.origin.path.clone(),
            name: f.name.clone(),
            line: f.line,
        },
        function_index: key.function_index,
        answer_index: key.answer_index(),
        dynamic_access: f.dynamic_access_flags.clone(),
    })
}

/// Extracted functions of a corpus in `(repo, path, line)` order.
#[derive(Clone, Debug, Default)]
pub struct FunctionPool {
    pub functions: Vec<SourceFunction>,
    pub files: usize,
    pub skips: BTreeMap<SkipReason, usize>,
}

pub fn functions_from_files(files: &[SourceFile], catalog: &BuiltinCatalog) -> FunctionPool {
    let mut sorted: Vec<&SourceFile> = files.iter().collect();
    sorted.sort_by(|a, b| (&a.repo, &a.path).cmp(&(&b.repo, &b.path)));
    let per_file: Vec<Option<crate::pyast::Extraction>> = sorted
        .par_iter()
        .map(|file| {
            if !file.parse_ok {
                return None;
            }
            let tree = parse_module(&file.text).ok()?;
            let origin = FunctionOrigin {
                repo: file.repo.clone(),
                path: file.path.clone(),
            };
            Some(extract_with_report(&tree, catalog, 0, &origin))
        })
        .collect();
    let mut pool = FunctionPool {
        files: files.len(),
        ..Default::default()
    };
    for ex in per_file {
        match ex {
            None => *pool.skips.entry(SkipReason::UnparsableFile).or_default() += 1,
            Some(ex) => {
                if ex.without_docstring > 0 {
                    *pool.skips.entry(SkipReason::NoDocstring).or_default() += ex.without_docstring;
                }
                if ex.header_unparse_failures > 0 {
                    *pool.skips.entry(SkipReason::UnparseFailure).or_default() +=
                        ex.header_unparse_failures;
                }
                pool.functions.extend(ex.functions);
            }
        }
    }
    pool
}

/// Fingerprint of an extracted corpus; keys every per-function decision.
pub fn corpus_hash(functions: &[SourceFunction]) -> String {
    let mut h = Sha256::new();
    for f in functions {
        for part in [
            f.origin.repo.as_str(),
            f.origin.path.as_str(),
            f.name.as_str(),
            &f.line.to_string(),
            &f.signature_text,
            &f.docstring,
            &f.body.len().to_string(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub n: usize,
    pub seed: u64,
    pub mode: SwapMode,
    pub exclude_dynamic: bool,
    pub catalog_version: String,
    pub rng_version: String,
    #[serde(default)]
    pub corpus_hash: String,
}

impl GenerationConfig {
    pub fn new(n: usize, seed: u64, mode: SwapMode, catalog: &BuiltinCatalog) -> Self {
        Self {
            n,
            seed,
            mode,
            exclude_dynamic: false,
            catalog_version: catalog.version().to_owned(),
            rng_version: RNG_VERSION.to_owned(),
            corpus_hash: String::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub functions: usize,
    pub buildable: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    pub dynamic_access: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<ClassificationExample>,
    pub config: GenerationConfig,
    pub summary: GenerationSummary,
}

/// Turns every function into a candidate example, then samples
/// `min(n, buildable)` of them uniformly without replacement. Examples come
/// out in function order.
pub fn sample_dataset(functions: &[SourceFunction], config: &GenerationConfig) -> Dataset {
    let hash = corpus_hash(functions);
    let mode = config.mode;
    let built: Vec<Result<ClassificationExample, SkipReason>> = functions
        .par_iter()
        .enumerate()
        .map(|(function_index, f)| {
            if config.exclude_dynamic && !f.dynamic_access_flags.is_empty() {
                return Err(SkipReason::DynamicAccess);
            }
            let key = ExampleKey {
                corpus_hash: &hash,
                function_index,
                seed: config.seed,
            };
            let s = choose_swap(f, key.swap_seed(), mode).map_err(|_| match mode {
                SwapMode::Builtin => SkipReason::FewerThanTwoBuiltins,
                SwapMode::Toplevel => SkipReason::FewerThanTwoToplevel,
            })?;
            build_example(f, &s, mode, &key)
        })
        .collect();

    let mut summary = GenerationSummary {
        functions: functions.len(),
        ..Default::default()
    };
    let mut pool = Vec::new();
    for r in built {
        match r {
            Ok(ex) => pool.push(ex),
            Err(reason) => *summary.skipped.entry(reason).or_default() += 1,
        }
    }
    summary.buildable = pool.len();
    if config.n > pool.len() {
        let w = format!(
            "requested {} examples but only {} functions are usable",
            config.n,
            pool.len()
        );
        tracing::warn!("{w}");
        summary.warnings.push(w);
    }
    let mut rng = DetRng::new(&["sample".into(), hash.as_str().into(), config.seed.into()]);
    let mut picked = rng.sample_indices(pool.len(), config.n.min(pool.len()));
    picked.sort_unstable();
    let mut slots: Vec<Option<ClassificationExample>> = pool.into_iter().map(Some).collect();
    let examples: Vec<_> = picked
        .into_iter()
        .map(|i| slots[i].take().expect("indices are distinct"))
        .collect();
    summary.dynamic_access = examples.iter().filter(|e| !e.dynamic_access.is_empty()).count();
    Dataset {
        examples,
        config: GenerationConfig {
            corpus_hash: hash,
            ..config.clone()
        },
        summary,
    }
}

/// Extraction and sampling in one step; upstream skips (unparsable files,
/// missing docstrings) are merged into the summary.
pub fn generate(files: &[SourceFile], catalog: &BuiltinCatalog, config: &GenerationConfig) -> Dataset {
    let pool = functions_from_files(files, catalog);
    let mut ds = sample_dataset(&pool.functions, config);
    for (reason, n) in pool.skips {
        *ds.summary.skipped.entry(reason).or_default() += n;
    }
    ds
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleMetadata {
    pub swap: SwapSpec,
    pub mode: SwapMode,
    pub origin: ExampleOrigin,
    pub function_index: usize,
    /// SHA-256 of the good continuation; lets `validate` audit `answer_index`.
    pub good_sha256: String,
    #[serde(default)]
    pub dynamic_access: BTreeSet<DynamicAccess>,
}

/// One line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub prompt: String,
    pub classes: [String; 2],
    pub answer_index: usize,
    pub metadata: ExampleMetadata,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl From<&ClassificationExample> for ExampleRecord {
    fn from(ex: &ClassificationExample) -> Self {
        let [c0, c1] = ex.classes();
        ExampleRecord {
            id: ex.id.clone(),
            prompt: ex.prompt.clone(),
            classes: [c0.to_owned(), c1.to_owned()],
            answer_index: ex.answer_index,
            metadata: ExampleMetadata {
                swap: ex.swap.clone(),
                mode: ex.mode,
                origin: ex.origin.clone(),
                function_index: ex.function_index,
                good_sha256: sha256_hex(&ex.good),
                dynamic_access: ex.dynamic_access.clone(),
            },
        }
    }
}

impl TryFrom<ExampleRecord> for ClassificationExample {
    type Error = String;

    fn try_from(r: ExampleRecord) -> Result<Self, String> {
        if r.answer_index > 1 {
            return Err(format!("answer_index {} is not 0 or 1", r.answer_index));
        }
        let [c0, c1] = r.classes;
        let (good, bad) = if r.answer_index == 0 { (c0, c1) } else { (c1, c0) };
        Ok(ClassificationExample {
            id: r.id,
            prompt: r.prompt,
            bad,
            good,
            swap: r.metadata.swap,
            mode: r.metadata.mode,
            origin: r.metadata.origin,
            function_index: r.metadata.function_index,
            answer_index: r.answer_index,
            dynamic_access: r.metadata.dynamic_access,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: header is not a dataset header")]
    Header { line: usize },
}

pub fn serialize(ds: &Dataset) -> Vec<u8> {
    let header = ArtifactHeader::new(
        DATASET_ARTIFACT,
        serde_json::to_value(&ds.config).expect("config serializes"),
        serde_json::to_value(&ds.summary).expect("summary serializes"),
    );
    let records: Vec<ExampleRecord> = ds.examples.iter().map(ExampleRecord::from).collect();
    jsonl_bytes(&header, &records)
}

pub fn deserialize(text: &str) -> Result<Dataset, DatasetError> {
    let (header, lines) = split_jsonl(text);
    let (config, summary) = match header {
        Some(h) if h.artifact == DATASET_ARTIFACT => (
            serde_json::from_value(h.config).map_err(|e| DatasetError::Malformed {
                line: 1,
                message: e.to_string(),
            })?,
            serde_json::from_value(h.summary).unwrap_or_default(),
        ),
        Some(_) => return Err(DatasetError::Header { line: 1 }),
        None => (
            GenerationConfig {
                n: 0,
                seed: 0,
                mode: SwapMode::Builtin,
                exclude_dynamic: false,
                catalog_version: String::new(),
                rng_version: String::new(),
                corpus_hash: String::new(),
            },
            GenerationSummary::default(),
        ),
    };
    let mut seen = BTreeSet::new();
    let mut examples = Vec::with_capacity(lines.len());
    for (line, text) in lines {
        let record: ExampleRecord = serde_json::from_str(text).map_err(|e| DatasetError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId { line, id: record.id });
        }
        examples.push(
            ClassificationExample::try_from(record)
                .map_err(|message| DatasetError::Malformed { line, message })?,
        );
    }
    Ok(Dataset {
        examples,
        config,
        summary,
    })
}
