//! Re-checks a dataset file from its bytes alone.

use std::collections::BTreeMap;

use rustpython_ast::Stmt;
use serde::Serialize;

use super::{sha256_hex, ExampleRecord};
use crate::artifact::split_jsonl;
use crate::pyast::{parse_module, structurally_equal};
use crate::transform::{apply_permutation, render_swap_statement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Malformed,
    DuplicateId,
    Parse,
    SwapStatement,
    Involution,
    AnswerIndex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub id: Option<String>,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub examples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<ViolationKind, usize> {
        let mut out = BTreeMap::new();
        for v in &self.violations {
            *out.entry(v.kind).or_default() += 1;
        }
        out
    }
}

/// The body after the docstring of the last top-level `def` in `program`.
fn function_body(program: &str) -> Result<Vec<Stmt>, String> {
    let tree = parse_module(program).map_err(|e| e.to_string())?;
    let body = match tree.body().last() {
        Some(Stmt::FunctionDef(f)) => &f.body,
        Some(Stmt::AsyncFunctionDef(f)) => &f.body,
        _ => return Err("program does not end in a function definition".into()),
    };
    Ok(body[1..].to_vec())
}

pub fn validate(text: &str) -> ValidationReport {
    let (_, lines) = split_jsonl(text);
    let mut report = ValidationReport::default();
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    for (line, raw) in lines {
        let record: ExampleRecord = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(e) => {
                report.violations.push(Violation {
                    line,
                    id: None,
                    kind: ViolationKind::Malformed,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        report.examples += 1;
        let mut flag = |kind, detail: String| {
            report.violations.push(Violation {
                line,
                id: Some(record.id.clone()),
                kind,
                detail,
            })
        };
        if let Some(first) = ids.insert(record.id.clone(), line) {
            flag(ViolationKind::DuplicateId, format!("first seen on line {first}"));
        }
        if record.answer_index > 1 {
            flag(ViolationKind::Malformed, format!("answer_index {}", record.answer_index));
            continue;
        }
        let swap = &record.metadata.swap;
        if !record.prompt.starts_with(&render_swap_statement(swap))
            && !record.prompt.starts_with(&render_swap_statement(&swap.sorted()))
        {
            flag(ViolationKind::SwapStatement, "prompt does not open with the swap statement".into());
        }
        let bodies: Vec<Result<Vec<Stmt>, String>> = record
            .classes
            .iter()
            .map(|c| function_body(&format!("{}{c}", record.prompt)))
            .collect();
        let mut parsed = Vec::new();
        for (i, b) in bodies.into_iter().enumerate() {
            match b {
                Ok(b) => parsed.push(b),
                Err(e) => flag(ViolationKind::Parse, format!("prompt + class {i}: {e}")),
            }
        }
        if parsed.len() != 2 {
            continue;
        }
        let g = swap.as_permutation();
        let linked = apply_permutation(&parsed[0], &g)
            .is_ok_and(|swapped| structurally_equal(&swapped, &parsed[1]))
            && apply_permutation(&parsed[1], &g)
                .is_ok_and(|swapped| structurally_equal(&swapped, &parsed[0]));
        if !linked {
            flag(
                ViolationKind::Involution,
                format!("swapping {} and {} does not map one class onto the other", swap.a, swap.b),
            );
        }
        if sha256_hex(&record.classes[record.answer_index]) != record.metadata.good_sha256 {
            flag(
                ViolationKind::AnswerIndex,
                format!("class {} is not the recorded good continuation", record.answer_index),
            );
        }
    }
    report
}
