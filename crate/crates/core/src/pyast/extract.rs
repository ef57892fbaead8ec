//! Top-level function extraction and the reference analyses that decide
//! which identifiers a function may have swapped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rustpython_ast::{Arguments, Constant, Expr, Ranged, Stmt, TypeParam};
use serde::{Deserialize, Serialize};

use super::names::{collect_usage, BindingKind, BindingSite, NameUsage, Walker};
use super::unparse::{render_def_header, unparse_expr, UnparseError};
use super::{line_column, parse_module, BuiltinCatalog, ModuleTree};

/// Where a function came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FunctionOrigin {
    pub repo: String,
    pub path: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicAccess {
    Eval,
    Exec,
    GetattrByString,
    Globals,
    Locals,
    Vars,
}

impl DynamicAccess {
    pub fn from_callee(name: &str) -> Option<Self> {
        Some(match name {
            "eval" => Self::Eval,
            "exec" => Self::Exec,
            "getattr" => Self::GetattrByString,
            "globals" => Self::Globals,
            "locals" => Self::Locals,
            "vars" => Self::Vars,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Eval => "eval",
            Self::Exec => "exec",
            Self::GetattrByString => "getattr-by-string",
            Self::Globals => "globals",
            Self::Locals => "locals",
            Self::Vars => "vars",
        }
    }
}

impl fmt::Display for DynamicAccess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Module-level facts a function's analysis depends on.
#[derive(Clone, Debug, Default)]
pub struct ModuleScope {
    /// First module-level binding site of each name, including names
    /// declared `global` inside any function.
    pub bindings: BTreeMap<String, BindingSite>,
    /// Names bound at module level only by `def` or `from ... import`.
    pub functions: BTreeSet<String>,
    pub star_import: bool,
}

impl ModuleScope {
    pub fn from_module(body: &[Stmt]) -> Self {
        let mut walker = Walker::module_level();
        walker.stmts(body);
        let module = walker.usage;
        let everything = collect_usage(body);

        let mut scope = ModuleScope {
            star_import: module.star_import,
            ..Default::default()
        };
        let globals = everything
            .bindings
            .iter()
            .filter(|b| b.kind == BindingKind::Global);
        for site in module.bindings.iter().chain(globals) {
            scope
                .bindings
                .entry(site.name.clone())
                .or_insert_with(|| site.clone());
        }
        let mut kinds: BTreeMap<&str, BTreeSet<BindingKind>> = BTreeMap::new();
        for site in &module.bindings {
            kinds.entry(&site.name).or_default().insert(site.kind);
        }
        for (name, kinds) in kinds {
            if kinds
                .iter()
                .all(|k| matches!(k, BindingKind::FunctionDef | BindingKind::ImportFrom))
            {
                scope.functions.insert(name.to_owned());
            }
        }
        for site in everything.bindings.iter().filter(|b| b.kind == BindingKind::Global) {
            scope.functions.remove(&site.name);
        }
        scope
    }

    pub fn binds(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }
}

/// A module-level function that carries a docstring.
#[derive(Clone, Debug)]
pub struct SourceFunction {
    pub origin: FunctionOrigin,
    pub name: String,
    /// Position among the module's top-level statements.
    pub stmt_index: usize,
    pub line: usize,
    pub is_async: bool,
    /// Rendered decorator lines, each starting with `@`.
    pub decorators: Vec<String>,
    /// Rendered `def` line including the trailing colon.
    pub signature_text: String,
    /// Docstring literal as it appears in the source (or a canonical
    /// rendering when the source text cannot stand on its own line).
    pub docstring: String,
    pub docstring_value: String,
    /// Statements after the docstring.
    pub body: Vec<Stmt>,
    pub builtin_refs: BTreeMap<String, usize>,
    /// References to module-level functions and from-imported names.
    pub toplevel_refs: BTreeMap<String, usize>,
    pub dynamic_access_flags: BTreeSet<DynamicAccess>,
    /// Names bound anywhere in the function (parameters included) or read
    /// by the decorators and signature, with the site that rules them out.
    pub local_exclusions: BTreeMap<String, BindingSite>,
    /// Shared by every function of the same module.
    pub module_scope: Arc<ModuleScope>,
}

impl SourceFunction {
    pub fn distinct_builtins(&self) -> usize {
        self.builtin_refs.len()
    }

    /// The site excluding `name` from builtin swaps: a local binding, a
    /// header read, or a module-level binding.
    pub fn builtin_exclusion(&self, name: &str) -> Option<&BindingSite> {
        self.local_exclusions
            .get(name)
            .or_else(|| self.module_scope.bindings.get(name))
    }
}

/// Result of scanning one module.
#[derive(Clone, Debug, Default)]
pub struct Extraction {
    pub functions: Vec<SourceFunction>,
    /// Top-level functions that were seen at all.
    pub candidates: usize,
    pub without_docstring: usize,
    pub below_min_builtins: usize,
    pub header_unparse_failures: usize,
}

pub fn extract_top_level_functions(
    tree: &ModuleTree,
    catalog: &BuiltinCatalog,
    min_builtins: usize,
) -> Vec<SourceFunction> {
    extract_with_report(tree, catalog, min_builtins, &FunctionOrigin::default()).functions
}

pub fn extract_with_report(
    tree: &ModuleTree,
    catalog: &BuiltinCatalog,
    min_builtins: usize,
    origin: &FunctionOrigin,
) -> Extraction {
    let scope = Arc::new(ModuleScope::from_module(tree.body()));
    let mut out = Extraction::default();
    for (idx, stmt) in tree.body().iter().enumerate() {
        let Some(def) = FnParts::of(stmt) else {
            continue;
        };
        out.candidates += 1;
        let Some((doc_expr, doc_value)) = docstring(def.body) else {
            out.without_docstring += 1;
            continue;
        };
        let analysis = analyze(&def, catalog, &scope);
        if analysis.builtin_refs.len() < min_builtins {
            out.below_min_builtins += 1;
            continue;
        }
        let header = match render_header(stmt, &def) {
            Ok(h) => h,
            Err(_) => {
                out.header_unparse_failures += 1;
                continue;
            }
        };
        let verbatim = tree.slice(doc_expr.range());
        let docstring = if docstring_stands_alone(verbatim, doc_value) {
            verbatim.to_owned()
        } else {
            match unparse_expr(doc_expr) {
                Ok(text) => text,
                Err(_) => {
                    out.header_unparse_failures += 1;
                    continue;
                }
            }
        };
        let (line, _) = line_column(tree.source(), usize::from(stmt.start()));
        out.functions.push(SourceFunction {
            origin: origin.clone(),
            name: def.name.to_owned(),
            stmt_index: idx,
            line,
            is_async: def.is_async,
            decorators: header.0,
            signature_text: header.1,
            docstring,
            docstring_value: doc_value.to_owned(),
            body: def.body[1..].to_vec(),
            builtin_refs: analysis.builtin_refs,
            toplevel_refs: analysis.toplevel_refs,
            dynamic_access_flags: analysis.dynamic,
            local_exclusions: analysis.local_exclusions,
            module_scope: scope.clone(),
        });
    }
    out
}

/// Counts unshadowed reads of catalog names in the body of a function
/// definition. Returns an empty map for any other statement.
pub fn builtin_references(
    def: &Stmt,
    catalog: &BuiltinCatalog,
    scope: &ModuleScope,
) -> BTreeMap<String, usize> {
    match FnParts::of(def) {
        Some(parts) => analyze(&parts, catalog, scope).builtin_refs,
        None => BTreeMap::new(),
    }
}

/// Syntactic scan for calls to reflection and evaluation builtins anywhere in
/// a function definition, decorators and defaults included.
pub fn detect_dynamic_access(def: &Stmt) -> BTreeSet<DynamicAccess> {
    let usage = collect_usage(std::slice::from_ref(def));
    usage
        .reads
        .iter()
        .filter(|r| r.is_callee)
        .filter_map(|r| DynamicAccess::from_callee(&r.name))
        .collect()
}

pub(crate) struct FnParts<'a> {
    pub name: &'a str,
    pub args: &'a Arguments,
    pub body: &'a [Stmt],
    pub decorators: &'a [Expr],
    pub returns: Option<&'a Expr>,
    pub type_params: &'a [TypeParam],
    pub is_async: bool,
}

impl<'a> FnParts<'a> {
    pub fn of(stmt: &'a Stmt) -> Option<Self> {
        match stmt {
            Stmt::FunctionDef(f) => Some(Self {
                name: f.name.as_str(),
                args: &f.args,
                body: &f.body,
                decorators: &f.decorator_list,
                returns: f.returns.as_deref(),
                type_params: &f.type_params,
                is_async: false,
            }),
            Stmt::AsyncFunctionDef(f) => Some(Self {
                name: f.name.as_str(),
                args: &f.args,
                body: &f.body,
                decorators: &f.decorator_list,
                returns: f.returns.as_deref(),
                type_params: &f.type_params,
                is_async: true,
            }),
            _ => None,
        }
    }
}

fn docstring(body: &[Stmt]) -> Option<(&Expr, &str)> {
    let Stmt::Expr(first) = body.first()? else {
        return None;
    };
    match first.value.as_ref() {
        Expr::Constant(c) => match &c.value {
            Constant::Str(s) if !s.is_empty() => Some((first.value.as_ref(), s.as_str())),
            _ => None,
        },
        _ => None,
    }
}

/// True when `literal`, placed on its own indented line as the first
/// statement of a function, still evaluates to `value`.
fn docstring_stands_alone(literal: &str, value: &str) -> bool {
    let probe = format!("def _():\n    {literal}\n");
    let Ok(tree) = parse_module(&probe) else {
        return false;
    };
    let Some(Stmt::FunctionDef(f)) = tree.body().first() else {
        return false;
    };
    f.body.len() == 1 && docstring(&f.body).map(|(_, v)| v) == Some(value)
}

fn render_header(stmt: &Stmt, def: &FnParts<'_>) -> Result<(Vec<String>, String), UnparseError> {
    let decorators = def
        .decorators
        .iter()
        .map(|d| unparse_expr(d).map(|t| format!("@{t}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((decorators, render_def_header(stmt)?))
}

struct Analysis {
    builtin_refs: BTreeMap<String, usize>,
    toplevel_refs: BTreeMap<String, usize>,
    dynamic: BTreeSet<DynamicAccess>,
    local_exclusions: BTreeMap<String, BindingSite>,
}

fn header_usage(def: &FnParts<'_>) -> NameUsage {
    let mut walker = Walker::default();
    for d in def.decorators {
        walker.expr(d);
    }
    walker.arguments(def.args);
    if let Some(r) = def.returns {
        walker.expr(r);
    }
    walker.type_params(def.type_params);
    walker.usage
}

fn analyze(def: &FnParts<'_>, catalog: &BuiltinCatalog, scope: &ModuleScope) -> Analysis {
    let body = collect_usage(def.body);
    let header = header_usage(def);

    let mut excluded: BTreeMap<String, BindingSite> = BTreeMap::new();
    for site in header.bindings.iter().chain(&body.bindings) {
        excluded
            .entry(site.name.clone())
            .or_insert_with(|| site.clone());
    }
    for read in &header.reads {
        excluded
            .entry(read.name.clone())
            .or_insert_with(|| BindingSite {
                name: read.name.clone(),
                kind: BindingKind::HeaderReference,
                offset: read.offset,
            });
    }

    let mut builtin_refs = BTreeMap::new();
    let mut toplevel_refs = BTreeMap::new();
    for read in &body.reads {
        let name = read.name.as_str();
        if catalog.contains(name) && !excluded.contains_key(name) && !scope.binds(name) {
            *builtin_refs.entry(read.name.clone()).or_insert(0) += 1;
        }
        if scope.functions.contains(name) && name != def.name && !excluded.contains_key(name) {
            *toplevel_refs.entry(read.name.clone()).or_insert(0) += 1;
        }
    }

    let dynamic = header
        .reads
        .iter()
        .chain(&body.reads)
        .filter(|r| r.is_callee)
        .filter_map(|r| DynamicAccess::from_callee(&r.name))
        .collect();

    Analysis {
        builtin_refs,
        toplevel_refs,
        dynamic,
        local_exclusions: excluded,
    }
}
