//! Corpus acquisition: repository manifests, license evidence, and turning a
//! directory tree into parse-checked Python source files.

mod crawl;
mod fetch;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

use crate::pyast::parse_module;

pub use crawl::{
    crawl_repositories, CrawlConfig, CrawlError, CrawlReport, GithubApi, RepoHit, SearchApi,
    SearchPage, SearchRange, SEARCH_RESULT_CAP,
};
pub use fetch::{clone_url, fetch_repositories, FetchError, FetchOutcome, FetchStatus};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoManifest {
    /// `host/owner/name`.
    pub identifier: String,
    pub stars: u64,
    pub size_kb: u64,
    /// README text that matched the license patterns.
    pub license_evidence: Option<String>,
    pub retrieval_date: NaiveDate,
}

impl RepoManifest {
    pub fn satisfies(&self, min_stars: u64, max_size_kb: u64) -> bool {
        self.stars >= min_stars && self.size_kb <= max_size_kb
    }
}

/// Keeps manifests meeting both thresholds (inclusive) and sorts them by
/// identifier, dropping later duplicates.
pub fn filter_manifests(
    manifests: Vec<RepoManifest>,
    min_stars: u64,
    max_size_kb: u64,
) -> Vec<RepoManifest> {
    let mut kept: Vec<_> = manifests
        .into_iter()
        .filter(|m| m.satisfies(min_stars, max_size_kb))
        .collect();
    kept.sort_by(|a, b| a.identifier.cmp(&b.identifier));
    kept.dedup_by(|b, a| a.identifier == b.identifier);
    kept
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Identifier of the repository the file belongs to.
    pub repo: String,
    /// Repository-relative path with `/` separators.
    pub path: String,
    pub text: String,
    pub parse_ok: bool,
}

impl SourceFile {
    pub fn new(repo: impl Into<String>, path: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let parse_ok = parse_module(&text).is_ok();
        Self {
            repo: repo.into(),
            path: path.into(),
            text,
            parse_ok,
        }
    }
}

static LICENSE_PATTERNS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bCC[- ]BY[- ]4\.0\b|creativecommons\.org/licenses/by/4\.0")
        .expect("valid regex")
});

/// Heuristic README check for a CC-BY-4.0 mention.
pub fn license_mentioned(readme_text: &str) -> bool {
    LICENSE_PATTERNS.is_match(readme_text)
}

/// The first matching span, for recording in a manifest.
pub fn license_evidence(readme_text: &str) -> Option<String> {
    LICENSE_PATTERNS
        .find(readme_text)
        .map(|m| m.as_str().to_owned())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Enumeration {
    pub files: Vec<SourceFile>,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, thiserror::Error)]
pub enum EnumerateError {
    #[error("{0} is not a readable directory")]
    NotADirectory(PathBuf),
    #[error("walking {path}: {source}")]
    Walk {
        path: PathBuf,
        #[source]
        source: walkdir::Error,
    },
}

/// Lists every `.py` file under `root`.
///
/// Repositories sit `repo_depth` directory levels below `root`; with depth 0
/// the root itself is a single repository named after its directory. A
/// repository identifier is its path relative to `root`.
pub fn enumerate_sources(root: &Path, repo_depth: usize) -> Result<Enumeration, EnumerateError> {
    if !root.is_dir() {
        return Err(EnumerateError::NotADirectory(root.to_owned()));
    }
    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    let walker = walkdir::WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name();
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                let path = err.path().map(Path::to_owned).unwrap_or_else(|| root.to_owned());
                if err.depth() == 0 {
                    return Err(EnumerateError::Walk { path, source: err });
                }
                skipped.push(SkippedFile {
                    path,
                    reason: err.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|e| e != "py") {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walk stays under root");
        let parts: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        if parts.len() <= repo_depth {
            skipped.push(SkippedFile {
                path: entry.path().to_owned(),
                reason: "outside any repository directory".into(),
            });
            continue;
        }
        let repo = if repo_depth == 0 {
            root_name(root)
        } else {
            parts[..repo_depth].join("/")
        };
        candidates.push((repo, parts[repo_depth..].join("/"), entry.into_path()));
    }

    let read: Vec<Result<SourceFile, SkippedFile>> = candidates
        .into_par_iter()
        .map(|(repo, path, full)| match std::fs::read(&full) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(text) => Ok(SourceFile::new(repo, path, text)),
                Err(_) => Err(SkippedFile {
                    path: full,
                    reason: "not valid UTF-8".into(),
                }),
            },
            Err(e) => Err(SkippedFile {
                path: full,
                reason: e.to_string(),
            }),
        })
        .collect();
    let mut files = Vec::new();
    for r in read {
        match r {
            Ok(f) => files.push(f),
            Err(s) => skipped.push(s),
        }
    }
    files.sort_by(|a, b| (&a.repo, &a.path).cmp(&(&b.repo, &b.path)));
    Ok(Enumeration { files, skipped })
}

fn root_name(root: &Path) -> String {
    root.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "local".to_owned())
}
