//! Canonical source rendering: 4-space indentation, single spaces around
//! binary operators, and only the parentheses the grammar needs.
//!
//! f-strings are rendered for the pre-3.12 grammar, where a replacement
//! field may not contain a backslash or reuse an enclosing quote character.
//! A tree that cannot be expressed under those rules yields [`UnparseError`].

use std::fmt::Write as _;

use rustpython_ast::{
    Arguments, BoolOp, CmpOp, Comprehension, Constant, ConversionFlag, ExceptHandler, Expr,
    Keyword, Operator, Pattern, Stmt, TypeParam, UnaryOp, WithItem,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("cannot render {0}")]
pub struct UnparseError(pub String);

type Result<T = ()> = std::result::Result<T, UnparseError>;

// Binding strength of the surrounding context, weakest first.
const STMT: u8 = 1;
const TUPLE: u8 = 2;
const TEST: u8 = 3;
const OR: u8 = 4;
const AND: u8 = 5;
const NOT: u8 = 6;
const CMP: u8 = 7;
const BOR: u8 = 8;
const BXOR: u8 = 9;
const BAND: u8 = 10;
const SHIFT: u8 = 11;
const ARITH: u8 = 12;
const TERM: u8 = 13;
const FACTOR: u8 = 14;
const POWER: u8 = 15;
const AWAIT: u8 = 16;
const ATOM: u8 = 17;

const INDENT: &str = "    ";

/// Renders statements, each line prefixed by `indent` levels.
pub fn unparse_stmts(stmts: &[Stmt], indent: usize) -> Result<String> {
    let mut w = Writer {
        out: String::new(),
        indent,
    };
    w.block_body(stmts)?;
    Ok(w.out)
}

pub fn unparse_expr(expr: &Expr) -> Result<String> {
    let mut out = String::new();
    write_expr(&mut out, expr, TEST, Cx::default())?;
    Ok(out)
}

/// The `def` (or `async def`) line of a function definition, colon included,
/// without decorators or newline.
pub fn render_def_header(stmt: &Stmt) -> Result<String> {
    let (kw, name, type_params, args, returns) = match stmt {
        Stmt::FunctionDef(f) => ("def", &f.name, &f.type_params, &f.args, &f.returns),
        Stmt::AsyncFunctionDef(f) => ("async def", &f.name, &f.type_params, &f.args, &f.returns),
        _ => return Err(UnparseError("a non-function statement as a def line".into())),
    };
    let mut out = format!("{kw} {name}");
    write_type_params(&mut out, type_params)?;
    out.push('(');
    write_arguments(&mut out, args, true)?;
    out.push(')');
    if let Some(r) = returns {
        out.push_str(" -> ");
        write_expr(&mut out, r, TEST, Cx::default())?;
    }
    out.push(':');
    Ok(out)
}

struct Writer {
    out: String,
    indent: usize,
}

impl Writer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block_body(&mut self, stmts: &[Stmt]) -> Result {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn block(&mut self, header: &str, body: &[Stmt]) -> Result {
        self.line(header);
        self.indent += 1;
        let r = self.block_body(body);
        self.indent -= 1;
        r
    }

    fn decorators(&mut self, decorators: &[Expr]) -> Result {
        for d in decorators {
            self.line(&format!("@{}", expr_str(d, TEST)?));
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result {
        match stmt {
            Stmt::FunctionDef(f) => {
                self.decorators(&f.decorator_list)?;
                self.block(&render_def_header(stmt)?, &f.body)?
            }
            Stmt::AsyncFunctionDef(f) => {
                self.decorators(&f.decorator_list)?;
                self.block(&render_def_header(stmt)?, &f.body)?
            }
            Stmt::ClassDef(c) => {
                self.decorators(&c.decorator_list)?;
                let mut h = format!("class {}", c.name);
                write_type_params(&mut h, &c.type_params)?;
                if !c.bases.is_empty() || !c.keywords.is_empty() {
                    h.push('(');
                    write_call_args(&mut h, &c.bases, &c.keywords, Cx::default())?;
                    h.push(')');
                }
                h.push(':');
                self.block(&h, &c.body)?
            }
            Stmt::Return(r) => match &r.value {
                Some(v) => self.line(&format!("return {}", expr_str(v, TUPLE)?)),
                None => self.line("return"),
            },
            Stmt::Delete(d) => {
                let targets = join(&d.targets, TEST)?;
                self.line(&format!("del {targets}"));
            }
            Stmt::Assign(a) => {
                let mut text = String::new();
                for t in &a.targets {
                    text.push_str(&expr_str(t, TUPLE)?);
                    text.push_str(" = ");
                }
                text.push_str(&expr_str(&a.value, STMT)?);
                self.line(&text);
            }
            Stmt::TypeAlias(t) => {
                let mut text = format!("type {}", expr_str(&t.name, TEST)?);
                write_type_params(&mut text, &t.type_params)?;
                text.push_str(" = ");
                text.push_str(&expr_str(&t.value, TEST)?);
                self.line(&text);
            }
            Stmt::AugAssign(a) => {
                let text = format!(
                    "{} {}= {}",
                    expr_str(&a.target, TEST)?,
                    operator(a.op).0,
                    expr_str(&a.value, STMT)?
                );
                self.line(&text);
            }
            Stmt::AnnAssign(a) => {
                let target = expr_str(&a.target, TEST)?;
                let mut text = if !a.simple && matches!(a.target.as_ref(), Expr::Name(_)) {
                    format!("({target})")
                } else {
                    target
                };
                text.push_str(": ");
                text.push_str(&expr_str(&a.annotation, TEST)?);
                if let Some(v) = &a.value {
                    text.push_str(" = ");
                    text.push_str(&expr_str(v, STMT)?);
                }
                self.line(&text);
            }
            Stmt::For(f) => {
                let h = format!(
                    "for {} in {}:",
                    expr_str(&f.target, TUPLE)?,
                    expr_str(&f.iter, TEST)?
                );
                self.block(&h, &f.body)?;
                self.orelse(&f.orelse)?
            }
            Stmt::AsyncFor(f) => {
                let h = format!(
                    "async for {} in {}:",
                    expr_str(&f.target, TUPLE)?,
                    expr_str(&f.iter, TEST)?
                );
                self.block(&h, &f.body)?;
                self.orelse(&f.orelse)?
            }
            Stmt::While(w) => {
                self.block(&format!("while {}:", expr_str(&w.test, TEST)?), &w.body)?;
                self.orelse(&w.orelse)?
            }
            Stmt::If(i) => {
                self.block(&format!("if {}:", expr_str(&i.test, TEST)?), &i.body)?;
                let mut orelse = &i.orelse;
                loop {
                    match orelse.as_slice() {
                        [Stmt::If(elif)] => {
                            let h = format!("elif {}:", expr_str(&elif.test, TEST)?);
                            self.block(&h, &elif.body)?;
                            orelse = &elif.orelse;
                        }
                        [] => break,
                        rest => {
                            self.block("else:", rest)?;
                            break;
                        }
                    }
                }
            }
            Stmt::With(w) => self.block(&format!("with {}:", with_items(&w.items)?), &w.body)?,
            Stmt::AsyncWith(w) => {
                self.block(&format!("async with {}:", with_items(&w.items)?), &w.body)?
            }
            Stmt::Match(m) => {
                self.line(&format!("match {}:", expr_str(&m.subject, TEST)?));
                self.indent += 1;
                for case in &m.cases {
                    let mut h = String::from("case ");
                    write_pattern(&mut h, &case.pattern, TEST)?;
                    if let Some(g) = &case.guard {
                        h.push_str(" if ");
                        h.push_str(&expr_str(g, TEST)?);
                    }
                    h.push(':');
                    self.block(&h, &case.body)?;
                }
                self.indent -= 1;
            }
            Stmt::Raise(r) => {
                let mut text = String::from("raise");
                if let Some(e) = &r.exc {
                    text.push(' ');
                    text.push_str(&expr_str(e, TEST)?);
                }
                if let Some(c) = &r.cause {
                    text.push_str(" from ");
                    text.push_str(&expr_str(c, TEST)?);
                }
                self.line(&text);
            }
            Stmt::Try(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, false)?,
            Stmt::TryStar(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, true)?,
            Stmt::Assert(a) => {
                let mut text = format!("assert {}", expr_str(&a.test, TEST)?);
                if let Some(m) = &a.msg {
                    text.push_str(", ");
                    text.push_str(&expr_str(m, TEST)?);
                }
                self.line(&text);
            }
            Stmt::Import(i) => {
                let names: Vec<_> = i.names.iter().map(alias).collect();
                self.line(&format!("import {}", names.join(", ")));
            }
            Stmt::ImportFrom(i) => {
                let dots = ".".repeat(i.level.as_ref().map_or(0, |l| l.to_usize()));
                let module = i.module.as_ref().map_or("", |m| m.as_str());
                let names: Vec<_> = i.names.iter().map(alias).collect();
                self.line(&format!("from {dots}{module} import {}", names.join(", ")));
            }
            Stmt::Global(g) => {
                let names: Vec<_> = g.names.iter().map(|n| n.as_str()).collect();
                self.line(&format!("global {}", names.join(", ")));
            }
            Stmt::Nonlocal(n) => {
                let names: Vec<_> = n.names.iter().map(|n| n.as_str()).collect();
                self.line(&format!("nonlocal {}", names.join(", ")));
            }
            Stmt::Expr(e) => self.line(&expr_str(&e.value, STMT)?),
            Stmt::Pass(_) => self.line("pass"),
            Stmt::Break(_) => self.line("break"),
            Stmt::Continue(_) => self.line("continue"),
        }
        Ok(())
    }

    fn orelse(&mut self, orelse: &[Stmt]) -> Result {
        if orelse.is_empty() {
            Ok(())
        } else {
            self.block("else:", orelse)
        }
    }

    fn try_stmt(
        &mut self,
        body: &[Stmt],
        handlers: &[ExceptHandler],
        orelse: &[Stmt],
        finalbody: &[Stmt],
        star: bool,
    ) -> Result {
        self.block("try:", body)?;
        for ExceptHandler::ExceptHandler(h) in handlers {
            let mut head = String::from(if star { "except*" } else { "except" });
            if let Some(t) = &h.type_ {
                head.push(' ');
                head.push_str(&expr_str(t, TEST)?);
            }
            if let Some(n) = &h.name {
                head.push_str(" as ");
                head.push_str(n);
            }
            head.push(':');
            self.block(&head, &h.body)?;
        }
        self.orelse(orelse)?;
        if !finalbody.is_empty() {
            self.block("finally:", finalbody)?;
        }
        Ok(())
    }
}

fn alias(a: &rustpython_ast::Alias) -> String {
    match &a.asname {
        Some(n) => format!("{} as {n}", a.name),
        None => a.name.to_string(),
    }
}

fn with_items(items: &[WithItem]) -> Result<String> {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(&mut out, &item.context_expr, TEST, Cx::default())?;
        if let Some(v) = &item.optional_vars {
            out.push_str(" as ");
            write_expr(&mut out, v, TEST, Cx::default())?;
        }
    }
    Ok(out)
}

fn expr_str(e: &Expr, prec: u8) -> Result<String> {
    let mut out = String::new();
    write_expr(&mut out, e, prec, Cx::default())?;
    Ok(out)
}

fn join(exprs: &[Expr], prec: u8) -> Result<String> {
    let parts = exprs
        .iter()
        .map(|e| expr_str(e, prec))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join(", "))
}

/// Constraints that apply inside an f-string replacement field.
#[derive(Clone, Copy, Default)]
struct Cx {
    in_fstring: bool,
    /// Quote characters (`'`, `"`) that may not open a nested literal.
    no_delim: [bool; 2],
    /// Quote characters that may not appear anywhere in nested literal text.
    no_content: [bool; 2],
}

const QUOTES: [char; 2] = ['\'', '"'];

fn write_all(out: &mut String, exprs: &[Expr], prec: u8, cx: Cx) -> Result {
    for (i, e) in exprs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, e, prec, cx)?;
    }
    Ok(())
}

fn open_if(out: &mut String, cond: bool) {
    if cond {
        out.push('(');
    }
}

fn close_if(out: &mut String, cond: bool) {
    if cond {
        out.push(')');
    }
}

fn operator(op: Operator) -> (&'static str, u8) {
    match op {
        Operator::Add => ("+", ARITH),
        Operator::Sub => ("-", ARITH),
        Operator::Mult => ("*", TERM),
        Operator::MatMult => ("@", TERM),
        Operator::Div => ("/", TERM),
        Operator::Mod => ("%", TERM),
        Operator::FloorDiv => ("//", TERM),
        Operator::Pow => ("**", POWER),
        Operator::LShift => ("<<", SHIFT),
        Operator::RShift => (">>", SHIFT),
        Operator::BitOr => ("|", BOR),
        Operator::BitXor => ("^", BXOR),
        Operator::BitAnd => ("&", BAND),
    }
}

fn cmp_op(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "==",
        CmpOp::NotEq => "!=",
        CmpOp::Lt => "<",
        CmpOp::LtE => "<=",
        CmpOp::Gt => ">",
        CmpOp::GtE => ">=",
        CmpOp::Is => "is",
        CmpOp::IsNot => "is not",
        CmpOp::In => "in",
        CmpOp::NotIn => "not in",
    }
}

fn write_expr(out: &mut String, expr: &Expr, prec: u8, cx: Cx) -> Result {
    match expr {
        Expr::BoolOp(b) => {
            let (word, p) = match b.op {
                BoolOp::And => (" and ", AND),
                BoolOp::Or => (" or ", OR),
            };
            open_if(out, prec > p);
            for (i, v) in b.values.iter().enumerate() {
                if i > 0 {
                    out.push_str(word);
                }
                write_expr(out, v, p + 1, cx)?;
            }
            close_if(out, prec > p);
        }
        Expr::NamedExpr(n) => {
            out.push('(');
            write_expr(out, &n.target, ATOM, cx)?;
            out.push_str(" := ");
            write_expr(out, &n.value, TEST, cx)?;
            out.push(')');
        }
        Expr::BinOp(b) => {
            let (sym, p) = operator(b.op);
            let (lp, rp) = if b.op == Operator::Pow {
                (p + 1, p)
            } else {
                (p, p + 1)
            };
            open_if(out, prec > p);
            write_expr(out, &b.left, lp, cx)?;
            write!(out, " {sym} ").unwrap();
            write_expr(out, &b.right, rp, cx)?;
            close_if(out, prec > p);
        }
        Expr::UnaryOp(u) => {
            let (sym, p) = match u.op {
                UnaryOp::Not => ("not ", NOT),
                UnaryOp::Invert => ("~", FACTOR),
                UnaryOp::UAdd => ("+", FACTOR),
                UnaryOp::USub => ("-", FACTOR),
            };
            open_if(out, prec > p);
            out.push_str(sym);
            write_expr(out, &u.operand, p, cx)?;
            close_if(out, prec > p);
        }
        Expr::Lambda(l) => {
            open_if(out, prec > TEST);
            out.push_str("lambda");
            let mut params = String::new();
            write_arguments_cx(&mut params, &l.args, false, cx)?;
            if !params.is_empty() {
                out.push(' ');
                out.push_str(&params);
            }
            out.push_str(": ");
            write_expr(out, &l.body, TEST, cx)?;
            close_if(out, prec > TEST);
        }
        Expr::IfExp(i) => {
            open_if(out, prec > TEST);
            write_expr(out, &i.body, OR, cx)?;
            out.push_str(" if ");
            write_expr(out, &i.test, OR, cx)?;
            out.push_str(" else ");
            write_expr(out, &i.orelse, TEST, cx)?;
            close_if(out, prec > TEST);
        }
        Expr::Dict(d) => {
            out.push('{');
            for (i, (k, v)) in d.keys.iter().zip(&d.values).enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match k {
                    Some(k) => {
                        write_expr(out, k, TEST, cx)?;
                        out.push_str(": ");
                        write_expr(out, v, TEST, cx)?;
                    }
                    None => {
                        out.push_str("**");
                        write_expr(out, v, BOR, cx)?;
                    }
                }
            }
            out.push('}');
        }
        Expr::Set(s) => {
            if s.elts.is_empty() {
                out.push_str("{*()}");
            } else {
                out.push('{');
                write_all(out, &s.elts, TEST, cx)?;
                out.push('}');
            }
        }
        Expr::ListComp(c) => {
            out.push('[');
            write_expr(out, &c.elt, TEST, cx)?;
            write_generators(out, &c.generators, cx)?;
            out.push(']');
        }
        Expr::SetComp(c) => {
            out.push('{');
            write_expr(out, &c.elt, TEST, cx)?;
            write_generators(out, &c.generators, cx)?;
            out.push('}');
        }
        Expr::DictComp(c) => {
            out.push('{');
            write_expr(out, &c.key, TEST, cx)?;
            out.push_str(": ");
            write_expr(out, &c.value, TEST, cx)?;
            write_generators(out, &c.generators, cx)?;
            out.push('}');
        }
        Expr::GeneratorExp(c) => {
            out.push('(');
            write_expr(out, &c.elt, TEST, cx)?;
            write_generators(out, &c.generators, cx)?;
            out.push(')');
        }
        Expr::Await(a) => {
            open_if(out, prec > AWAIT);
            out.push_str("await ");
            write_expr(out, &a.value, ATOM, cx)?;
            close_if(out, prec > AWAIT);
        }
        Expr::Yield(y) => {
            open_if(out, prec > STMT);
            out.push_str("yield");
            if let Some(v) = &y.value {
                out.push(' ');
                write_expr(out, v, TUPLE, cx)?;
            }
            close_if(out, prec > STMT);
        }
        Expr::YieldFrom(y) => {
            open_if(out, prec > STMT);
            out.push_str("yield from ");
            write_expr(out, &y.value, TEST, cx)?;
            close_if(out, prec > STMT);
        }
        Expr::Compare(c) => {
            open_if(out, prec > CMP);
            write_expr(out, &c.left, CMP + 1, cx)?;
            for (op, right) in c.ops.iter().zip(&c.comparators) {
                write!(out, " {} ", cmp_op(*op)).unwrap();
                write_expr(out, right, CMP + 1, cx)?;
            }
            close_if(out, prec > CMP);
        }
        Expr::Call(c) => {
            write_expr(out, &c.func, ATOM, cx)?;
            out.push('(');
            write_call_args(out, &c.args, &c.keywords, cx)?;
            out.push(')');
        }
        Expr::FormattedValue(_) | Expr::JoinedStr(_) => {
            let parts = match expr {
                Expr::JoinedStr(j) => j.values.as_slice(),
                other => std::slice::from_ref(other),
            };
            write_fstring(out, parts, cx)?;
        }
        Expr::Constant(c) => {
            if let Some(kind) = &c.kind {
                out.push_str(kind);
            }
            write_constant(out, &c.value, cx)?;
        }
        Expr::Attribute(a) => {
            write_expr(out, &a.value, ATOM, cx)?;
            if let Expr::Constant(c) = a.value.as_ref() {
                if matches!(c.value, Constant::Int(_)) {
                    out.push(' ');
                }
            }
            out.push('.');
            out.push_str(&a.attr);
        }
        Expr::Subscript(s) => {
            write_expr(out, &s.value, ATOM, cx)?;
            out.push('[');
            match s.slice.as_ref() {
                Expr::Tuple(t) if !t.elts.is_empty() => {
                    write_all(out, &t.elts, TEST, cx)?;
                    if t.elts.len() == 1 {
                        out.push(',');
                    }
                }
                other => write_expr(out, other, TUPLE, cx)?,
            }
            out.push(']');
        }
        Expr::Starred(s) => {
            out.push('*');
            write_expr(out, &s.value, BOR, cx)?;
        }
        Expr::Name(n) => out.push_str(&n.id),
        Expr::List(l) => {
            out.push('[');
            write_all(out, &l.elts, TEST, cx)?;
            out.push(']');
        }
        Expr::Tuple(t) => {
            let parens = t.elts.len() <= 1 || prec > TUPLE;
            open_if(out, parens);
            write_all(out, &t.elts, TEST, cx)?;
            if t.elts.len() == 1 {
                out.push(',');
            }
            close_if(out, parens);
        }
        Expr::Slice(s) => {
            if let Some(l) = &s.lower {
                write_expr(out, l, TEST, cx)?;
            }
            out.push(':');
            if let Some(u) = &s.upper {
                write_expr(out, u, TEST, cx)?;
            }
            if let Some(st) = &s.step {
                out.push(':');
                write_expr(out, st, TEST, cx)?;
            }
        }
    }
    Ok(())
}

fn write_generators(out: &mut String, generators: &[Comprehension], cx: Cx) -> Result {
    for g in generators {
        out.push_str(if g.is_async { " async for " } else { " for " });
        write_expr(out, &g.target, TUPLE, cx)?;
        out.push_str(" in ");
        write_expr(out, &g.iter, OR, cx)?;
        for cond in &g.ifs {
            out.push_str(" if ");
            write_expr(out, cond, OR, cx)?;
        }
    }
    Ok(())
}

fn write_call_args(out: &mut String, args: &[Expr], keywords: &[Keyword], cx: Cx) -> Result {
    let mut first = true;
    let mut sep = |out: &mut String| {
        if !first {
            out.push_str(", ");
        }
        first = false;
    };
    for a in args {
        sep(out);
        write_expr(out, a, TEST, cx)?;
    }
    for kw in keywords {
        sep(out);
        match &kw.arg {
            Some(name) => {
                out.push_str(name);
                out.push('=');
                write_expr(out, &kw.value, TEST, cx)?;
            }
            None => {
                out.push_str("**");
                write_expr(out, &kw.value, BOR, cx)?;
            }
        }
    }
    Ok(())
}

fn write_arguments(out: &mut String, args: &Arguments, annotations: bool) -> Result {
    write_arguments_cx(out, args, annotations, Cx::default())
}

fn write_arguments_cx(out: &mut String, args: &Arguments, annotations: bool, cx: Cx) -> Result {
    let mut first = true;
    let mut sep = |out: &mut String| {
        if !first {
            out.push_str(", ");
        }
        first = false;
    };
    let param = |out: &mut String, arg: &rustpython_ast::Arg, default: Option<&Expr>| -> Result {
        out.push_str(&arg.arg);
        let annotated = annotations && arg.annotation.is_some();
        if let Some(ann) = arg.annotation.as_ref().filter(|_| annotations) {
            out.push_str(": ");
            write_expr(out, ann, TEST, cx)?;
        }
        if let Some(d) = default {
            out.push_str(if annotated { " = " } else { "=" });
            write_expr(out, d, TEST, cx)?;
        }
        Ok(())
    };
    for a in &args.posonlyargs {
        sep(out);
        param(out, &a.def, a.default.as_deref())?;
    }
    if !args.posonlyargs.is_empty() {
        sep(out);
        out.push('/');
    }
    for a in &args.args {
        sep(out);
        param(out, &a.def, a.default.as_deref())?;
    }
    if let Some(v) = &args.vararg {
        sep(out);
        out.push('*');
        param(out, v, None)?;
    } else if !args.kwonlyargs.is_empty() {
        sep(out);
        out.push('*');
    }
    for a in &args.kwonlyargs {
        sep(out);
        param(out, &a.def, a.default.as_deref())?;
    }
    if let Some(k) = &args.kwarg {
        sep(out);
        out.push_str("**");
        param(out, k, None)?;
    }
    Ok(())
}

fn write_type_params(out: &mut String, params: &[TypeParam]) -> Result {
    if params.is_empty() {
        return Ok(());
    }
    out.push('[');
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match p {
            TypeParam::TypeVar(t) => {
                out.push_str(&t.name);
                if let Some(b) = &t.bound {
                    out.push_str(": ");
                    write_expr(out, b, TEST, Cx::default())?;
                }
            }
            TypeParam::ParamSpec(p) => write!(out, "**{}", p.name).unwrap(),
            TypeParam::TypeVarTuple(p) => write!(out, "*{}", p.name).unwrap(),
        }
    }
    out.push(']');
    Ok(())
}

fn write_pattern(out: &mut String, pattern: &Pattern, prec: u8) -> Result {
    match pattern {
        Pattern::MatchValue(v) => write_expr(out, &v.value, TEST, Cx::default())?,
        Pattern::MatchSingleton(s) => write_constant(out, &s.value, Cx::default())?,
        Pattern::MatchSequence(s) => {
            out.push('[');
            for (i, p) in s.patterns.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_pattern(out, p, TEST)?;
            }
            out.push(']');
        }
        Pattern::MatchMapping(m) => {
            out.push('{');
            let mut first = true;
            for (k, p) in m.keys.iter().zip(&m.patterns) {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                write_expr(out, k, TEST, Cx::default())?;
                out.push_str(": ");
                write_pattern(out, p, TEST)?;
            }
            if let Some(rest) = &m.rest {
                if !first {
                    out.push_str(", ");
                }
                write!(out, "**{rest}").unwrap();
            }
            out.push('}');
        }
        Pattern::MatchClass(c) => {
            write_expr(out, &c.cls, ATOM, Cx::default())?;
            out.push('(');
            let mut first = true;
            for p in &c.patterns {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                write_pattern(out, p, TEST)?;
            }
            for (attr, p) in c.kwd_attrs.iter().zip(&c.kwd_patterns) {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                write!(out, "{attr}=").unwrap();
                write_pattern(out, p, TEST)?;
            }
            out.push(')');
        }
        Pattern::MatchStar(s) => {
            write!(out, "*{}", s.name.as_ref().map_or("_", |n| n.as_str())).unwrap()
        }
        Pattern::MatchAs(a) => match (&a.pattern, &a.name) {
            (None, None) => out.push('_'),
            (None, Some(n)) => out.push_str(n),
            (Some(p), name) => {
                let name = name
                    .as_ref()
                    .ok_or_else(|| UnparseError("an as-pattern without a name".into()))?;
                open_if(out, prec > TEST);
                write_pattern(out, p, BOR)?;
                write!(out, " as {name}").unwrap();
                close_if(out, prec > TEST);
            }
        },
        Pattern::MatchOr(o) => {
            open_if(out, prec > BOR);
            for (i, p) in o.patterns.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                write_pattern(out, p, BOR + 1)?;
            }
            close_if(out, prec > BOR);
        }
    }
    Ok(())
}

fn write_constant(out: &mut String, value: &Constant, cx: Cx) -> Result {
    match value {
        Constant::None => out.push_str("None"),
        Constant::Bool(true) => out.push_str("True"),
        Constant::Bool(false) => out.push_str("False"),
        Constant::Ellipsis => out.push_str("..."),
        Constant::Int(i) => write!(out, "{i}").unwrap(),
        Constant::Float(f) => out.push_str(&float_repr(*f)),
        Constant::Complex { real, imag } => {
            if *real == 0.0 && real.is_sign_positive() {
                write!(out, "{}j", float_repr(*imag)).unwrap();
            } else {
                write!(out, "({} + {}j)", float_repr(*real), float_repr(*imag)).unwrap();
            }
        }
        Constant::Str(s) => {
            if cx.in_fstring {
                write_nested_literal(out, "", s.chars().map(|c| c as u32), cx)?;
            } else {
                out.push_str(&str_repr(s));
            }
        }
        Constant::Bytes(b) => {
            if cx.in_fstring {
                write_nested_literal(out, "b", b.iter().map(|&c| c as u32), cx)?;
            } else {
                out.push_str(&bytes_repr(b));
            }
        }
        Constant::Tuple(items) => {
            out.push('(');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_constant(out, item, cx)?;
            }
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
    }
    Ok(())
}

fn float_repr(f: f64) -> String {
    if f.is_infinite() {
        "1e309".to_owned()
    } else {
        format!("{f:?}")
    }
}

fn needs_escape(c: char) -> bool {
    c.is_control() || matches!(c, '\u{2028}' | '\u{2029}' | '\u{feff}' | '\u{200b}'..='\u{200f}')
}

fn push_escaped_char(out: &mut String, c: char) {
    match c {
        '\\' => out.push_str("\\\\"),
        '\n' => out.push_str("\\n"),
        '\r' => out.push_str("\\r"),
        '\t' => out.push_str("\\t"),
        c if (c as u32) < 0x100 => write!(out, "\\x{:02x}", c as u32).unwrap(),
        c if (c as u32) < 0x10000 => write!(out, "\\u{:04x}", c as u32).unwrap(),
        c => write!(out, "\\U{:08x}", c as u32).unwrap(),
    }
}

fn repr_quote(has_single: bool, has_double: bool) -> char {
    if has_single && !has_double {
        '"'
    } else {
        '\''
    }
}

/// `repr()`-style rendering of a string literal.
pub(crate) fn str_repr(s: &str) -> String {
    let q = repr_quote(s.contains('\''), s.contains('"'));
    let mut out = String::with_capacity(s.len() + 2);
    out.push(q);
    for c in s.chars() {
        if c == q {
            out.push('\\');
            out.push(c);
        } else if c == '\\' || needs_escape(c) {
            push_escaped_char(&mut out, c);
        } else {
            out.push(c);
        }
    }
    out.push(q);
    out
}

fn bytes_repr(b: &[u8]) -> String {
    let q = repr_quote(b.contains(&b'\''), b.contains(&b'"'));
    let mut out = String::with_capacity(b.len() + 3);
    out.push('b');
    out.push(q);
    for &byte in b {
        match byte {
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\r' => out.push_str("\\r"),
            b'\t' => out.push_str("\\t"),
            c if c as char == q => {
                out.push('\\');
                out.push(q);
            }
            0x20..=0x7e => out.push(byte as char),
            c => write!(out, "\\x{c:02x}").unwrap(),
        }
    }
    out.push(q);
    out
}

/// A plain string or bytes literal inside a replacement field: no escapes
/// available, and the delimiter must differ from every enclosing one.
fn write_nested_literal(
    out: &mut String,
    prefix: &str,
    units: impl Iterator<Item = u32> + Clone,
    cx: Cx,
) -> Result {
    let chars: Vec<char> = units
        .map(|u| char::from_u32(u).unwrap_or('\u{fffd}'))
        .collect();
    let escapable = chars.iter().any(|&c| c == '\\' || needs_escape(c));
    let bytes_bad = prefix == "b" && chars.iter().any(|&c| !(' '..='~').contains(&c));
    let forbidden = |c: char| QUOTES.iter().zip(cx.no_content).any(|(&q, f)| f && q == c);
    if escapable || bytes_bad || chars.iter().any(|&c| forbidden(c)) {
        return Err(UnparseError("a string literal inside an f-string expression".into()));
    }
    for (i, &q) in QUOTES.iter().enumerate() {
        if cx.no_delim[i] || chars.contains(&q) {
            continue;
        }
        out.push_str(prefix);
        out.push(q);
        out.extend(chars.iter());
        out.push(q);
        return Ok(());
    }
    Err(UnparseError("a string literal inside an f-string expression".into()))
}

fn write_fstring(out: &mut String, parts: &[Expr], cx: Cx) -> Result {
    let candidates: &[&str] = if cx.in_fstring {
        &["'", "\""]
    } else {
        &["'", "\"", "'''", "\"\"\""]
    };
    for delim in candidates {
        let q = delim.chars().next().unwrap();
        let qi = QUOTES.iter().position(|&c| c == q).unwrap();
        if cx.no_delim[qi] {
            continue;
        }
        let mut inner = cx;
        inner.in_fstring = true;
        inner.no_content[qi] = true;
        if delim.len() == 1 {
            inner.no_delim[qi] = true;
        }
        let mut body = String::new();
        if fstring_body(&mut body, parts, q, cx, inner).is_ok() {
            write!(out, "f{delim}{body}{delim}").unwrap();
            return Ok(());
        }
    }
    Err(UnparseError("an f-string under pre-3.12 quoting rules".into()))
}

/// Literal text of an f-string delimited by `q`.
fn fstring_literal(out: &mut String, s: &str, q: char, outer: Cx, in_spec: bool) -> Result {
    for c in s.chars() {
        let forbidden = QUOTES
            .iter()
            .zip(outer.no_content)
            .any(|(&oq, f)| f && oq == c);
        if forbidden {
            return Err(UnparseError("enclosing quote in f-string text".into()));
        }
        match c {
            '{' if !in_spec => out.push_str("{{"),
            '}' if !in_spec => out.push_str("}}"),
            c if c == q || c == '\\' || needs_escape(c) => {
                if outer.in_fstring {
                    return Err(UnparseError("backslash inside an f-string expression".into()));
                }
                if c == q {
                    out.push('\\');
                    out.push(c);
                } else {
                    push_escaped_char(out, c);
                }
            }
            c => out.push(c),
        }
    }
    Ok(())
}

fn fstring_body(out: &mut String, parts: &[Expr], q: char, outer: Cx, inner: Cx) -> Result {
    fstring_parts(out, parts, q, outer, inner, false)
}

fn fstring_parts(
    out: &mut String,
    parts: &[Expr],
    q: char,
    outer: Cx,
    inner: Cx,
    in_spec: bool,
) -> Result {
    for part in parts {
        match part {
            Expr::Constant(c) => match &c.value {
                Constant::Str(s) => fstring_literal(out, s, q, outer, in_spec)?,
                _ => return Err(UnparseError("a non-string f-string part".into())),
            },
            Expr::FormattedValue(f) => {
                let mut field = String::new();
                write_expr(&mut field, &f.value, TEST + 1, inner)?;
                out.push('{');
                if field.starts_with('{') {
                    out.push(' ');
                }
                out.push_str(&field);
                match f.conversion {
                    ConversionFlag::None => {}
                    ConversionFlag::Str => out.push_str("!s"),
                    ConversionFlag::Ascii => out.push_str("!a"),
                    ConversionFlag::Repr => out.push_str("!r"),
                }
                if let Some(spec) = &f.format_spec {
                    out.push(':');
                    let spec_parts = match spec.as_ref() {
                        Expr::JoinedStr(j) => j.values.as_slice(),
                        other => std::slice::from_ref(other),
                    };
                    fstring_parts(out, spec_parts, q, outer, inner, true)?;
                }
                out.push('}');
            }
            Expr::JoinedStr(j) => fstring_parts(out, &j.values, q, outer, inner, in_spec)?,
            _ => return Err(UnparseError("an unexpected f-string part".into())),
        }
    }
    Ok(())
}
