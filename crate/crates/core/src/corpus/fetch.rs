//! Shallow clones of manifest repositories into `DEST/host/owner/name`.

use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;
use serde::Serialize;

use super::RepoManifest;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "detail")]
pub enum FetchStatus {
    Cloned,
    AlreadyPresent,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FetchOutcome {
    pub identifier: String,
    pub path: PathBuf,
    #[serde(flatten)]
    pub status: FetchStatus,
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("creating {path}: {source}")]
    Dest {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid repository identifier {0:?}")]
    Identifier(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Clone URL for `identifier` (`host/owner/name`). With `clone_base` the
/// host is replaced: `{clone_base}/owner/name`.
pub fn clone_url(identifier: &str, clone_base: Option<&str>) -> Result<String, FetchError> {
    let parts: Vec<&str> = identifier.split('/').collect();
    if parts.len() != 3 || parts.iter().any(|p| p.is_empty() || *p == "." || *p == "..") {
        return Err(FetchError::Identifier(identifier.to_owned()));
    }
    Ok(match clone_base {
        Some(base) => format!("{}/{}/{}", base.trim_end_matches('/'), parts[1], parts[2]),
        None => format!("https://{identifier}"),
    })
}

/// Clones every manifest not already present under `dest`. Per-repository
/// failures are reported in the outcomes, not raised.
pub fn fetch_repositories(
    manifests: &[RepoManifest],
    dest: &Path,
    clone_base: Option<&str>,
    workers: usize,
) -> Result<Vec<FetchOutcome>, FetchError> {
    std::fs::create_dir_all(dest).map_err(|source| FetchError::Dest {
        path: dest.to_owned(),
        source,
    })?;
    let jobs = manifests
        .iter()
        .map(|m| Ok((m, clone_url(&m.identifier, clone_base)?)))
        .collect::<Result<Vec<_>, FetchError>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| FetchError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|(m, url)| {
                let path = dest.join(&m.identifier);
                let status = clone_one(url, &path);
                FetchOutcome {
                    identifier: m.identifier.clone(),
                    path,
                    status,
                }
            })
            .collect()
    }))
}

fn clone_one(url: &str, path: &Path) -> FetchStatus {
    if path.join(".git").exists() {
        return FetchStatus::AlreadyPresent;
    }
    if let Some(parent) = path.parent() {
        if let Err(e) = std::fs::create_dir_all(parent) {
            return FetchStatus::Failed(e.to_string());
        }
    }
    let output = Command::new("git")
        .args(["clone", "--quiet", "--depth", "1", "--", url])
        .arg(path)
        .env("GIT_TERMINAL_PROMPT", "0")
        .output();
    match output {
        Ok(o) if o.status.success() => FetchStatus::Cloned,
        Ok(o) => {
            let _ = std::fs::remove_dir_all(path);
            FetchStatus::Failed(String::from_utf8_lossy(&o.stderr).trim().to_owned())
        }
        Err(e) => FetchStatus::Failed(format!("running git: {e}")),
    }
}
