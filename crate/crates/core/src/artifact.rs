//! Artifact plumbing shared by every pipeline stage: atomic file writes and
//! the self-describing first line of JSON Lines files.
//!
//! A JSONL artifact may start with a header line of the form
//! `{"swapbench": {"artifact": ..., "tool_version": ..., "config": ...}}`.
//! Readers accept files without one.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const HEADER_KEY: &str = "swapbench";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub artifact: String,
    pub tool_version: String,
    #[serde(default)]
    pub config: Value,
    /// Stage-specific summary (skip counts, warnings, ...).
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

impl ArtifactHeader {
    pub fn new(artifact: &str, config: Value, summary: Value) -> Self {
        Self {
            artifact: artifact.to_owned(),
            tool_version: TOOL_VERSION.to_owned(),
            config,
            summary,
        }
    }

    /// The header as one JSON line, newline included.
    pub fn to_line(&self) -> String {
        let mut wrapper = serde_json::Map::new();
        wrapper.insert(
            HEADER_KEY.to_owned(),
            serde_json::to_value(self).expect("header serializes"),
        );
        let mut line = serde_json::to_string(&wrapper).expect("header serializes");
        line.push('\n');
        line
    }

    /// Parses `line` as a header; `None` when it is an ordinary record.
    pub fn from_line(line: &str) -> Option<Self> {
        let value: Value = serde_json::from_str(line).ok()?;
        let obj = value.as_object()?;
        if obj.len() != 1 {
            return None;
        }
        serde_json::from_value(obj.get(HEADER_KEY)?.clone()).ok()
    }
}

/// Splits JSONL text into an optional header and the remaining non-blank
/// lines paired with their 1-based line numbers.
pub fn split_jsonl(text: &str) -> (Option<ArtifactHeader>, Vec<(usize, &str)>) {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    let header = match lines.peek() {
        Some((_, first)) => ArtifactHeader::from_line(first),
        None => None,
    };
    if header.is_some() {
        lines.next();
    }
    (header, lines.collect())
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Serializes `records` as JSON Lines behind `header`.
pub fn jsonl_bytes<T: Serialize>(header: &ArtifactHeader, records: &[T]) -> Vec<u8> {
    let mut out = header.to_line().into_bytes();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Parses every record of a JSONL artifact, skipping the header.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(
    text: &str,
) -> Result<(Option<ArtifactHeader>, Vec<T>), JsonlError> {
    let (header, lines) = split_jsonl(text);
    let records = lines
        .into_iter()
        .map(|(line, l)| serde_json::from_str(l).map_err(|source| JsonlError::Malformed { line, source }))
        .collect::<Result<Vec<T>, _>>()?;
    Ok((header, records))
}
