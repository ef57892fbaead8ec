//! Deterministic synthetic Python corpus.
//!
//! Stands in for a crawled corpus when no network or checkout is
//! available. Modules mix idiomatic builtin usage with the awkward cases
//! extraction must handle: functions without docstrings, methods, nested
//! defs, shadowed builtins, dynamic access and module-level rebinding.
//! Repositories are laid out as `owner/name/...`, for
//! [`enumerate_sources`](crate::corpus::enumerate_sources) at depth 2.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::write_atomic;
use crate::corpus::SourceFile;
use crate::rng::DetRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub repos: usize,
    pub modules_per_repo: usize,
    /// Public functions per module; helpers and edge cases come on top.
    pub functions_per_module: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            repos: 40,
            modules_per_repo: 4,
            functions_per_module: 8,
            seed: 0,
        }
    }
}

const OWNERS: &[&str] = &[
    "acme", "bluefin", "corvid", "delta-labs", "ember", "fjord", "granite", "harbor", "ion", "juniper",
];
const PROJECTS: &[&str] = &[
    "toolkit", "pipeline", "inventory", "scraper", "ledger", "notebook", "metrics", "archive", "router",
    "planner", "indexer", "mailer",
];
const MODULES: &[&str] = &[
    "utils", "io", "core", "parsing", "report", "cache", "models", "cli", "helpers", "formats", "checks",
];
const VERBS: &[&str] = &[
    "load", "parse", "count", "collect", "format", "filter", "merge", "build", "summarize", "normalize",
    "split", "scan", "render", "check", "group", "find", "read", "write", "clean", "rank",
];
const NOUNS: &[&str] = &[
    "items", "records", "lines", "tokens", "rows", "entries", "words", "names", "values", "paths",
    "scores", "events", "blocks", "fields", "labels", "chunks",
];
const SEQS: &[&str] = &["items", "values", "rows", "records", "entries", "words", "lines", "data", "parts"];
const SCALARS: &[&str] = &["limit", "width", "count", "size", "offset", "depth"];
const TEXTS: &[&str] = &["text", "line", "name", "label", "key", "prefix", "word"];
const PATHS: &[&str] = &["path", "filename", "source", "target"];
const LOCALS: &[&str] = &[
    "result", "total", "output", "found", "seen", "acc", "buf", "best", "pairs", "counts", "chunk", "out",
];

/// One statement template; placeholders: `{s}` sequence parameter, `{t}`
/// text parameter, `{n}` numeric parameter, `{p}` path parameter, `{v}`
/// local name, `{h}` helper function, `{k}` small integer.
const STATEMENTS: &[&str] = &[
    "{v} = len({s})",
    "if not isinstance({s}, list):\n    {s} = list({s})",
    "for i in range(len({s})):\n    print(i, {s}[i])",
    "{v} = sorted({s}, key=str)",
    "{v} = sum(abs(x) for x in {s})",
    "with open({p}) as fh:\n    {v} = fh.read()",
    "{v} = [str(x) for x in {s}]",
    "print('processing', len({s}), 'items')",
    "for idx, item in enumerate({s}):\n    if isinstance(item, str):\n        print(idx, item.strip())",
    "if any(x is None for x in {s}):\n    return []",
    "{v} = list(filter(None, map(str.strip, {s})))",
    "{v} = min(len({s}), {n})",
    "{v} = max({s}, default=0)",
    "{v} = dict(zip({s}, range(len({s}))))",
    "{v} = {t}.split()\nprint(len({v}))",
    "if len({t}) > {n}:\n    {t} = {t}[:{n}]",
    "{v} = int({t}) if {t}.isdigit() else 0",
    "{v} = round(float({n}) / {k}, 2)",
    "assert isinstance({n}, int), 'expected an integer'",
    "{v} = set({s})",
    "{v} = tuple(sorted(set({s})))",
    "for a, b in zip({s}, {s}[1:]):\n    print(a, b)",
    "{v} = [x for x in {s} if isinstance(x, (int, float))]",
    "if not all(isinstance(x, str) for x in {s}):\n    raise TypeError('expected strings')",
    "{v} = ''.join(chr(ord(c) + 1) for c in {t})",
    "{v} = {{}}\nfor x in {s}:\n    {v}[x] = {v}.get(x, 0) + 1",
    "{v} = list(reversed({s}))",
    "{v} = hash({t}) % {k}",
    "print(repr({t}))",
    "{v} = divmod({n}, {k})",
    "{v} = {h}({s})",
    "{v} = [{h}(x) for x in {s}]",
    "with open({p}, 'w') as fh:\n    print({t}, file=fh)",
    "{v} = next(iter({s}), None)",
    "{v} = pow({n}, 2)",
    "for line in open({p}):\n    print(line.rstrip())",
    "{v} = str({n}).zfill({k})",
    "{v} = bool(len({s}))",
    "{v} = [type(x).__name__ for x in {s}]",
    "{v} = input('value: ') if {n} < 0 else str({n})",
];

const RETURNS: &[&str] = &[
    "return {v}",
    "return len({s})",
    "return sorted({v})",
    "return list({v})",
    "return str({v})",
    "return max({s}) if {s} else None",
    "return sum({s}) / len({s})",
    "return isinstance({v}, dict)",
    "return {h}({v})",
    "return min({n}, len({s}))",
    "return int({n})",
];

const DOCS: &[&str] = &[
    "\"\"\"{Verb} the {noun}.\"\"\"",
    "\"\"\"Return the {noun} after {verb}ing them.\"\"\"",
    "'''{Verb} {noun} and report progress.'''",
    "\"\"\"{Verb} {noun}.\n\nArgs:\n    The input {noun}.\n\"\"\"",
    "\"{Verb} the given {noun}\"",
    "\"\"\"Helper to {verb} {noun}; see README.\"\"\"",
];

/// Unusual bodies that extraction must classify correctly.
const ODDITIES: &[&str] = &[
    // shadowed builtins
    "def {name}({s}):\n    \"\"\"Shadow the builtin list.\"\"\"\n    list = [x for x in {s}]\n    print(len(list))\n    return list\n",
    // dynamic access
    "def {name}(obj, {t}):\n    \"\"\"Look up an attribute by name.\"\"\"\n    value = getattr(obj, {t})\n    print(len(str(value)))\n    return value\n",
    "def {name}({t}):\n    \"\"\"Evaluate an expression.\"\"\"\n    return eval({t}, {{'abs': abs, 'len': len}})\n",
    // nested def
    "def {name}({s}):\n    \"\"\"Sort with a nested key.\"\"\"\n    def key(x):\n        return len(str(x))\n    return sorted({s}, key=key)\n",
    // no docstring
    "def {name}({s}):\n    print(len({s}))\n    return sorted({s})\n",
    // class with a method
    "class {Cls}:\n    \"\"\"Container.\"\"\"\n\n    def size(self):\n        \"\"\"Return the size.\"\"\"\n        print(len(self.items))\n        return len(self.items)\n",
    // keyword-only and default arguments
    "def {name}({s}, *, {n}=10, sep=', '):\n    \"\"\"Join the first few.\"\"\"\n    return sep.join(str(x) for x in {s}[:{n}])\n",
    // decorated
    "@staticmethod\ndef {name}({t}):\n    \"\"\"Decorated helper.\"\"\"\n    print({t})\n    return len({t})\n",
];

fn pick<'a>(rng: &mut DetRng, items: &'a [&'a str]) -> &'a str {
    items[rng.below(items.len() as u64) as usize]
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
        .unwrap_or_default()
}

fn mentions(text: &str, name: &str) -> bool {
    text.match_indices(name).any(|(i, _)| {
        let word = |c: char| c.is_ascii_alphanumeric() || c == '_';
        let before = text[..i].chars().next_back().is_none_or(|c| !word(c) && c != '.');
        let after = text[i + name.len()..].chars().next().is_none_or(|c| !word(c));
        before && after
    })
}

fn indent(block: &str, by: &str) -> String {
    block
        .lines()
        .map(|l| if l.is_empty() { "\n".to_owned() } else { format!("{by}{l}\n") })
        .collect()
}

struct Roles {
    s: String,
    t: String,
    n: String,
    p: String,
}

fn fill(template: &str, roles: &Roles, v: &str, h: &str, k: u64) -> String {
    template
        .replace("{s}", &roles.s)
        .replace("{t}", &roles.t)
        .replace("{n}", &roles.n)
        .replace("{p}", &roles.p)
        .replace("{v}", v)
        .replace("{h}", h)
        .replace("{k}", &k.to_string())
        .replace("{{", "{")
        .replace("}}", "}")
}

fn docstring(rng: &mut DetRng, verb: &str, noun: &str) -> String {
    pick(rng, DOCS)
        .replace("{Verb}", &capitalize(verb))
        .replace("{verb}", verb.trim_end_matches('e'))
        .replace("{noun}", noun)
}

fn function(rng: &mut DetRng, name: &str, helpers: &[String], statements: usize) -> String {
    let verb = name.split('_').next().unwrap_or("do");
    let noun = name.rsplit('_').next().unwrap_or("items");
    let roles = Roles {
        s: pick(rng, SEQS).to_owned(),
        t: pick(rng, TEXTS).to_owned(),
        n: pick(rng, SCALARS).to_owned(),
        p: pick(rng, PATHS).to_owned(),
    };
    let helper = if helpers.is_empty() {
        "str".to_owned()
    } else {
        helpers[rng.below(helpers.len() as u64) as usize].clone()
    };
    let mut body = String::new();
    body.push_str(&docstring(rng, verb, noun));
    body.push('\n');
    let mut v = pick(rng, LOCALS).to_owned();
    let mut assigned = false;
    for _ in 0..statements {
        let t = pick(rng, STATEMENTS);
        if t.starts_with("{v} =") {
            v = pick(rng, LOCALS).to_owned();
            assigned = true;
        }
        let k = 2 + rng.below(8);
        body.push_str(&fill(t, &roles, &v, &helper, k));
        body.push('\n');
    }
    if !assigned {
        body.push_str(&format!("{v} = list({})\n", roles.s));
    }
    body.push_str(&fill(pick(rng, RETURNS), &roles, &v, &helper, 2));
    let mut params: Vec<&str> = [&roles.s, &roles.t, &roles.n, &roles.p]
        .into_iter()
        .map(String::as_str)
        .filter(|name| mentions(&body, name))
        .collect();
    params.dedup();
    let defaults = if rng.below(4) == 0 && params.len() > 1 {
        let last = params.pop().expect("nonempty");
        format!(", {last}=None")
    } else {
        String::new()
    };
    format!("def {name}({}{defaults}):\n{}", params.join(", "), indent(&body, "    "))
}

/// Text of one module.
pub fn module_text(rng: &mut DetRng, functions: usize) -> String {
    let mut out = String::new();
    for import in ["import os", "import re", "import sys", "from collections import defaultdict"] {
        if rng.coin() {
            out.push_str(import);
            out.push('\n');
        }
    }
    out.push_str(&format!("\nDEFAULT_LIMIT = {}\n", 10 + rng.below(90)));
    if rng.below(6) == 0 {
        // A module-level rebinding blocks one builtin for the whole file.
        out.push_str("input = sys.stdin.readline if 'sys' in dir() else None\n");
    }
    out.push_str("\n\n");

    let helpers: Vec<String> = (0..1 + rng.below(3))
        .map(|i| format!("_{}_{}{}", pick(rng, VERBS), pick(rng, NOUNS), i))
        .collect();
    let mut defs = Vec::new();
    for h in &helpers {
        let n = 1 + rng.below(2) as usize;
        defs.push(function(rng, h, &[], n));
    }
    for i in 0..functions {
        let name = format!("{}_{}", pick(rng, VERBS), pick(rng, NOUNS));
        let name = if defs.iter().any(|d: &String| d.starts_with(&format!("def {name}("))) {
            format!("{name}_{i}")
        } else {
            name
        };
        let n = 2 + rng.below(4) as usize;
        defs.push(function(rng, &name, &helpers, n));
    }
    if rng.below(2) == 0 {
        let name = format!("{}_{}_x", pick(rng, VERBS), pick(rng, NOUNS));
        let roles = Roles {
            s: pick(rng, SEQS).to_owned(),
            t: pick(rng, TEXTS).to_owned(),
            n: pick(rng, SCALARS).to_owned(),
            p: pick(rng, PATHS).to_owned(),
        };
        let odd = pick(rng, ODDITIES).replace("{name}", &name).replace("{Cls}", &capitalize(&roles.s));
        defs.push(fill(&odd, &roles, "out", "str", 3).trim_end().to_owned() + "\n");
    }
    out.push_str(&defs.join("\n\n"));
    if rng.below(3) == 0 {
        out.push_str("\n\nif __name__ == '__main__':\n    print(DEFAULT_LIMIT)\n");
    }
    out
}

/// Every file of the corpus as `(repo, path, text)`, sorted by repo and path.
pub fn synth_sources(config: &SynthConfig) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for r in 0..config.repos {
        let mut rng = DetRng::new(&["synth-repo".into(), config.seed.into(), (r as u64).into()]);
        let repo = format!("{}/{}-{r}", pick(&mut rng, OWNERS), pick(&mut rng, PROJECTS));
        let package = pick(&mut rng, PROJECTS).replace('-', "_");
        let mut names: Vec<String> = Vec::new();
        for m in 0..config.modules_per_repo {
            let base = pick(&mut rng, MODULES);
            let name = if names.iter().any(|n| n.starts_with(base)) {
                format!("{base}{m}")
            } else {
                base.to_owned()
            };
            names.push(name.clone());
            let mut mrng = DetRng::new(&[
                "synth-module".into(),
                config.seed.into(),
                (r as u64).into(),
                (m as u64).into(),
            ]);
            let text = module_text(&mut mrng, config.functions_per_module);
            out.push((repo.clone(), format!("{package}/{name}.py"), text));
        }
        out.push((repo.clone(), "README.md".into(), "Licensed under CC-BY-4.0.\n".into()));
    }
    out.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    out
}

/// The corpus as in-memory source files (Python files only).
pub fn synth_files(config: &SynthConfig) -> Vec<SourceFile> {
    synth_sources(config)
        .into_iter()
        .filter(|(_, path, _)| path.ends_with(".py"))
        .map(|(repo, path, text)| SourceFile::new(repo, path, text))
        .collect()
}

/// Writes the corpus under `root`; returns the number of files written.
pub fn write_corpus(root: &Path, config: &SynthConfig) -> io::Result<usize> {
    let sources = synth_sources(config);
    for (repo, path, text) in &sources {
        let full = root.join(repo).join(path);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_atomic(&full, text.as_bytes())?;
    }
    Ok(sources.len())
}
