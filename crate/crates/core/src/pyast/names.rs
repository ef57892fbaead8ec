//! Borrowing walk over a statement list that records every identifier read
//! and every binding site, including bindings that are not `Name` nodes
//! (parameters, imports, exception names, match captures, declarations).

use rustpython_ast::text_size::TextSize;
use rustpython_ast::{
    Arguments, Comprehension, ExceptHandler, Expr, ExprContext, Pattern, Stmt, TypeParam,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingKind {
    Parameter,
    Assignment,
    AugmentedAssignment,
    Delete,
    ForTarget,
    WithTarget,
    ExceptName,
    Import,
    ImportFrom,
    FunctionDef,
    ClassDef,
    Walrus,
    ComprehensionTarget,
    MatchCapture,
    TypeParameter,
    Global,
    Nonlocal,
    /// Not a binding: a read in a decorator, default or annotation, which
    /// the prompt evaluates after the swap statement.
    HeaderReference,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingSite {
    pub name: String,
    pub kind: BindingKind,
    /// Byte offset into the source the tree was parsed from.
    pub offset: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameRead {
    pub name: String,
    pub offset: u32,
    /// Set when the read is the callee of a call expression.
    pub is_callee: bool,
}

/// Every read and binding found in a fragment, in source order.
#[derive(Clone, Debug, Default)]
pub struct NameUsage {
    pub reads: Vec<NameRead>,
    pub bindings: Vec<BindingSite>,
    /// `from m import *` seen somewhere in the fragment.
    pub star_import: bool,
}

impl NameUsage {
    pub fn is_bound(&self, name: &str) -> bool {
        self.bindings.iter().any(|b| b.name == name)
    }

    pub fn first_binding(&self, name: &str) -> Option<&BindingSite> {
        self.bindings.iter().find(|b| b.name == name)
    }

    pub fn read_count(&self, name: &str) -> usize {
        self.reads.iter().filter(|r| r.name == name).count()
    }
}

pub fn collect_usage(stmts: &[Stmt]) -> NameUsage {
    let mut walker = Walker::default();
    walker.stmts(stmts);
    walker.usage
}

#[derive(Default)]
pub(crate) struct Walker {
    pub(crate) usage: NameUsage,
    anchor: u32,
    /// Stop at function, lambda and class bodies: only the bindings of the
    /// scope being walked are recorded.
    shallow: bool,
}

fn off(pos: TextSize) -> u32 {
    pos.into()
}

impl Walker {
    pub(crate) fn module_level() -> Self {
        Self {
            shallow: true,
            ..Self::default()
        }
    }

    fn bind(&mut self, name: &str, kind: BindingKind, offset: u32) {
        self.usage.bindings.push(BindingSite {
            name: name.to_owned(),
            kind,
            offset,
        });
    }

    pub(crate) fn stmts(&mut self, stmts: &[Stmt]) {
        for stmt in stmts {
            self.stmt(stmt);
        }
    }

    pub(crate) fn stmt(&mut self, stmt: &Stmt) {
        use rustpython_ast::Ranged;
        self.anchor = off(stmt.start());
        let anchor = self.anchor;
        match stmt {
            Stmt::FunctionDef(f) => {
                self.exprs(&f.decorator_list);
                self.arguments(&f.args);
                if let Some(r) = &f.returns {
                    self.expr(r);
                }
                self.type_params(&f.type_params);
                self.bind(&f.name, BindingKind::FunctionDef, anchor);
                if !self.shallow {
                    self.stmts(&f.body);
                }
            }
            Stmt::AsyncFunctionDef(f) => {
                self.exprs(&f.decorator_list);
                self.arguments(&f.args);
                if let Some(r) = &f.returns {
                    self.expr(r);
                }
                self.type_params(&f.type_params);
                self.bind(&f.name, BindingKind::FunctionDef, anchor);
                if !self.shallow {
                    self.stmts(&f.body);
                }
            }
            Stmt::ClassDef(c) => {
                self.exprs(&c.decorator_list);
                self.exprs(&c.bases);
                for kw in &c.keywords {
                    self.expr(&kw.value);
                }
                self.type_params(&c.type_params);
                self.bind(&c.name, BindingKind::ClassDef, anchor);
                if !self.shallow {
                    self.stmts(&c.body);
                }
            }
            Stmt::Return(r) => {
                if let Some(v) = &r.value {
                    self.expr(v);
                }
            }
            Stmt::Delete(d) => self.exprs(&d.targets),
            Stmt::Assign(a) => {
                self.expr(&a.value);
                self.exprs(&a.targets);
            }
            Stmt::TypeAlias(t) => {
                self.type_params(&t.type_params);
                self.expr(&t.value);
                self.expr(&t.name);
            }
            Stmt::AugAssign(a) => {
                self.expr(&a.value);
                if let Expr::Name(n) = a.target.as_ref() {
                    self.usage.reads.push(NameRead {
                        name: n.id.to_string(),
                        offset: off(n.range.start()),
                        is_callee: false,
                    });
                    self.bind(&n.id, BindingKind::AugmentedAssignment, off(n.range.start()));
                } else {
                    self.expr(&a.target);
                }
            }
            Stmt::AnnAssign(a) => {
                self.expr(&a.annotation);
                if let Some(v) = &a.value {
                    self.expr(v);
                }
                self.expr(&a.target);
            }
            Stmt::For(f) => {
                self.expr(&f.iter);
                self.target(&f.target, BindingKind::ForTarget);
                self.stmts(&f.body);
                self.stmts(&f.orelse);
            }
            Stmt::AsyncFor(f) => {
                self.expr(&f.iter);
                self.target(&f.target, BindingKind::ForTarget);
                self.stmts(&f.body);
                self.stmts(&f.orelse);
            }
            Stmt::While(w) => {
                self.expr(&w.test);
                self.stmts(&w.body);
                self.stmts(&w.orelse);
            }
            Stmt::If(i) => {
                self.expr(&i.test);
                self.stmts(&i.body);
                self.stmts(&i.orelse);
            }
            Stmt::With(w) => {
                for item in &w.items {
                    self.expr(&item.context_expr);
                    if let Some(v) = &item.optional_vars {
                        self.target(v, BindingKind::WithTarget);
                    }
                }
                self.stmts(&w.body);
            }
            Stmt::AsyncWith(w) => {
                for item in &w.items {
                    self.expr(&item.context_expr);
                    if let Some(v) = &item.optional_vars {
                        self.target(v, BindingKind::WithTarget);
                    }
                }
                self.stmts(&w.body);
            }
            Stmt::Match(m) => {
                self.expr(&m.subject);
                for case in &m.cases {
                    self.pattern(&case.pattern);
                    if let Some(g) = &case.guard {
                        self.expr(g);
                    }
                    self.stmts(&case.body);
                }
            }
            Stmt::Raise(r) => {
                if let Some(e) = &r.exc {
                    self.expr(e);
                }
                if let Some(c) = &r.cause {
                    self.expr(c);
                }
            }
            Stmt::Try(t) => {
                self.stmts(&t.body);
                self.handlers(&t.handlers);
                self.stmts(&t.orelse);
                self.stmts(&t.finalbody);
            }
            Stmt::TryStar(t) => {
                self.stmts(&t.body);
                self.handlers(&t.handlers);
                self.stmts(&t.orelse);
                self.stmts(&t.finalbody);
            }
            Stmt::Assert(a) => {
                self.expr(&a.test);
                if let Some(m) = &a.msg {
                    self.expr(m);
                }
            }
            Stmt::Import(i) => {
                for alias in &i.names {
                    let bound = match &alias.asname {
                        Some(asname) => asname.as_str(),
                        None => alias.name.split('.').next().unwrap_or(&alias.name),
                    };
                    self.bind(bound, BindingKind::Import, off(alias.range.start()));
                }
            }
            Stmt::ImportFrom(i) => {
                for alias in &i.names {
                    if alias.name.as_str() == "*" {
                        self.usage.star_import = true;
                        continue;
                    }
                    let bound = alias.asname.as_ref().unwrap_or(&alias.name);
                    self.bind(bound, BindingKind::ImportFrom, off(alias.range.start()));
                }
            }
            Stmt::Global(g) => {
                for name in &g.names {
                    self.bind(name, BindingKind::Global, anchor);
                }
            }
            Stmt::Nonlocal(n) => {
                for name in &n.names {
                    self.bind(name, BindingKind::Nonlocal, anchor);
                }
            }
            Stmt::Expr(e) => self.expr(&e.value),
            Stmt::Pass(_) | Stmt::Break(_) | Stmt::Continue(_) => {}
        }
    }

    fn handlers(&mut self, handlers: &[ExceptHandler]) {
        for ExceptHandler::ExceptHandler(h) in handlers {
            if let Some(t) = &h.type_ {
                self.expr(t);
            }
            if let Some(name) = &h.name {
                self.bind(name, BindingKind::ExceptName, off(h.range.start()));
            }
            self.stmts(&h.body);
        }
    }

    pub(crate) fn type_params(&mut self, params: &[TypeParam]) {
        if self.shallow {
            return;
        }
        for param in params {
            match param {
                TypeParam::TypeVar(t) => {
                    if let Some(b) = &t.bound {
                        self.expr(b);
                    }
                    self.bind(&t.name, BindingKind::TypeParameter, off(t.range.start()));
                }
                TypeParam::ParamSpec(p) => {
                    self.bind(&p.name, BindingKind::TypeParameter, off(p.range.start()))
                }
                TypeParam::TypeVarTuple(p) => {
                    self.bind(&p.name, BindingKind::TypeParameter, off(p.range.start()))
                }
            }
        }
    }

    /// Defaults and annotations are reads in the enclosing scope; the
    /// parameter names themselves are bindings.
    pub(crate) fn arguments(&mut self, args: &Arguments) {
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            if let Some(d) = &a.default {
                self.expr(d);
            }
        }
        let plain = args
            .posonlyargs
            .iter()
            .chain(&args.args)
            .chain(&args.kwonlyargs)
            .map(|a| &a.def);
        let star = args.vararg.iter().chain(args.kwarg.iter()).map(|a| a.as_ref());
        for arg in plain.chain(star) {
            if let Some(ann) = &arg.annotation {
                self.expr(ann);
            }
            if !self.shallow {
                self.bind(&arg.arg, BindingKind::Parameter, off(arg.range.start()));
            }
        }
    }

    fn target(&mut self, target: &Expr, kind: BindingKind) {
        match target {
            Expr::Name(n) => self.bind(&n.id, kind, off(n.range.start())),
            Expr::Tuple(t) => {
                for e in &t.elts {
                    self.target(e, kind);
                }
            }
            Expr::List(l) => {
                for e in &l.elts {
                    self.target(e, kind);
                }
            }
            Expr::Starred(s) => self.target(&s.value, kind),
            other => self.expr(other),
        }
    }

    fn comprehensions(&mut self, generators: &[Comprehension]) {
        for comp in generators {
            self.expr(&comp.iter);
            self.target(&comp.target, BindingKind::ComprehensionTarget);
            self.exprs(&comp.ifs);
        }
    }

    fn exprs(&mut self, exprs: &[Expr]) {
        for e in exprs {
            self.expr(e);
        }
    }

    pub(crate) fn expr(&mut self, expr: &Expr) {
        match expr {
            Expr::Name(n) => match n.ctx {
                ExprContext::Load => self.usage.reads.push(NameRead {
                    name: n.id.to_string(),
                    offset: off(n.range.start()),
                    is_callee: false,
                }),
                ExprContext::Store => {
                    self.bind(&n.id, BindingKind::Assignment, off(n.range.start()))
                }
                ExprContext::Del => self.bind(&n.id, BindingKind::Delete, off(n.range.start())),
            },
            Expr::BoolOp(b) => self.exprs(&b.values),
            Expr::NamedExpr(n) => {
                self.expr(&n.value);
                self.target(&n.target, BindingKind::Walrus);
            }
            Expr::BinOp(b) => {
                self.expr(&b.left);
                self.expr(&b.right);
            }
            Expr::UnaryOp(u) => self.expr(&u.operand),
            Expr::Lambda(l) => {
                self.arguments(&l.args);
                if !self.shallow {
                    self.expr(&l.body);
                }
            }
            Expr::IfExp(i) => {
                self.expr(&i.test);
                self.expr(&i.body);
                self.expr(&i.orelse);
            }
            Expr::Dict(d) => {
                for k in d.keys.iter().flatten() {
                    self.expr(k);
                }
                self.exprs(&d.values);
            }
            Expr::Set(s) => self.exprs(&s.elts),
            Expr::ListComp(c) => {
                self.comprehensions(&c.generators);
                self.expr(&c.elt);
            }
            Expr::SetComp(c) => {
                self.comprehensions(&c.generators);
                self.expr(&c.elt);
            }
            Expr::DictComp(c) => {
                self.comprehensions(&c.generators);
                self.expr(&c.key);
                self.expr(&c.value);
            }
            Expr::GeneratorExp(c) => {
                self.comprehensions(&c.generators);
                self.expr(&c.elt);
            }
            Expr::Await(a) => self.expr(&a.value),
            Expr::Yield(y) => {
                if let Some(v) = &y.value {
                    self.expr(v);
                }
            }
            Expr::YieldFrom(y) => self.expr(&y.value),
            Expr::Compare(c) => {
                self.expr(&c.left);
                self.exprs(&c.comparators);
            }
            Expr::Call(c) => {
                self.expr(&c.func);
                if let Expr::Name(n) = c.func.as_ref() {
                    if n.ctx == ExprContext::Load {
                        if let Some(last) = self.usage.reads.last_mut() {
                            last.is_callee = true;
                        }
                    }
                }
                self.exprs(&c.args);
                for kw in &c.keywords {
                    self.expr(&kw.value);
                }
            }
            Expr::FormattedValue(f) => {
                self.expr(&f.value);
                if let Some(spec) = &f.format_spec {
                    self.expr(spec);
                }
            }
            Expr::JoinedStr(j) => self.exprs(&j.values),
            Expr::Constant(_) => {}
            Expr::Attribute(a) => self.expr(&a.value),
            Expr::Subscript(s) => {
                self.expr(&s.value);
                self.expr(&s.slice);
            }
            Expr::Starred(s) => self.expr(&s.value),
            Expr::List(l) => self.exprs(&l.elts),
            Expr::Tuple(t) => self.exprs(&t.elts),
            Expr::Slice(s) => {
                for part in [&s.lower, &s.upper, &s.step].into_iter().flatten() {
                    self.expr(part);
                }
            }
        }
    }

    fn pattern(&mut self, pattern: &Pattern) {
        match pattern {
            Pattern::MatchValue(v) => self.expr(&v.value),
            Pattern::MatchSingleton(_) => {}
            Pattern::MatchSequence(s) => {
                for p in &s.patterns {
                    self.pattern(p);
                }
            }
            Pattern::MatchMapping(m) => {
                self.exprs(&m.keys);
                for p in &m.patterns {
                    self.pattern(p);
                }
                if let Some(rest) = &m.rest {
                    self.bind(rest, BindingKind::MatchCapture, off(m.range.start()));
                }
            }
            Pattern::MatchClass(c) => {
                self.expr(&c.cls);
                for p in c.patterns.iter().chain(&c.kwd_patterns) {
                    self.pattern(p);
                }
            }
            Pattern::MatchStar(s) => {
                if let Some(name) = &s.name {
                    self.bind(name, BindingKind::MatchCapture, off(s.range.start()));
                }
            }
            Pattern::MatchAs(a) => {
                if let Some(p) = &a.pattern {
                    self.pattern(p);
                }
                if let Some(name) = &a.name {
                    self.bind(name, BindingKind::MatchCapture, off(a.range.start()));
                }
            }
            Pattern::MatchOr(o) => {
                for p in &o.patterns {
                    self.pattern(p);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyast::parse_module;

    fn usage(src: &str) -> NameUsage {
        collect_usage(parse_module(src).unwrap().body())
    }

    #[test]
    fn reads_and_bindings() {
        let u = usage("y = len(x)\nfor i in range(y):\n    print(i)\n");
        let reads: Vec<_> = u.reads.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(reads, ["len", "x", "range", "y", "print", "i"]);
        assert!(u.is_bound("y"));
        assert!(u.is_bound("i"));
        assert!(!u.is_bound("len"));
        assert!(u.reads.iter().find(|r| r.name == "len").unwrap().is_callee);
        assert!(!u.reads.iter().find(|r| r.name == "x").unwrap().is_callee);
    }

    #[test]
    fn non_name_bindings() {
        let u = usage(
            "import os.path\nfrom m import a as b\ntry:\n    pass\nexcept E as err:\n    pass\n\
             global g\nmatch v:\n    case [first, *rest]:\n        pass\n    case {'k': 1, **kw}:\n        pass\n",
        );
        for (name, kind) in [
            ("os", BindingKind::Import),
            ("b", BindingKind::ImportFrom),
            ("err", BindingKind::ExceptName),
            ("g", BindingKind::Global),
            ("first", BindingKind::MatchCapture),
            ("rest", BindingKind::MatchCapture),
            ("kw", BindingKind::MatchCapture),
        ] {
            assert_eq!(u.first_binding(name).map(|b| b.kind), Some(kind), "{name}");
        }
        assert!(!u.is_bound("a"));
    }

    #[test]
    fn attributes_and_keywords_are_not_names() {
        let u = usage("obj.len(key=len)\n");
        assert_eq!(u.read_count("len"), 1);
        assert_eq!(u.read_count("key"), 0);
    }

    #[test]
    fn lambda_and_comprehension_targets_bind() {
        let u = usage("f = lambda len=3: len\nxs = [r for r in rows if r]\n");
        assert_eq!(u.first_binding("len").unwrap().kind, BindingKind::Parameter);
        assert_eq!(u.first_binding("r").unwrap().kind, BindingKind::ComprehensionTarget);
    }

    #[test]
    fn star_import_flag() {
        assert!(usage("from os import *\n").star_import);
    }
}
