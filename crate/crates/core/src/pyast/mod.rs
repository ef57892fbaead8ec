//! Python 3 front end: parsing, canonical unparsing, top-level function
//! extraction and scope-aware builtin-reference analysis.
//!
//! Parsing is delegated to `rustpython-parser`; everything that decides what
//! a name refers to lives here.

mod catalog;
mod extract;
mod names;
mod unparse;

use std::convert::Infallible;
use std::fmt;

pub use rustpython_ast as ast;
use rustpython_ast::text_size::TextRange;
use rustpython_ast::{Fold, Stmt};

pub use catalog::{is_identifier, BuiltinCatalog, CatalogError};
pub use extract::{
    builtin_references, detect_dynamic_access, extract_top_level_functions, extract_with_report,
    DynamicAccess, Extraction, FunctionOrigin, ModuleScope, SourceFunction,
};
pub use names::{collect_usage, BindingKind, BindingSite, NameRead, NameUsage};
pub use unparse::{render_def_header, unparse_expr, unparse_stmts, UnparseError};

/// A parsed module together with the text it came from.
#[derive(Clone, Debug)]
pub struct ModuleTree {
    body: Vec<Stmt>,
    source: String,
}

/// Location-carrying syntax error. Lines and columns are 1-based, columns
/// count characters.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
    pub message: String,
}

/// Parses `text` as a complete Python 3 module. Never returns a partial tree.
pub fn parse_module(text: &str) -> Result<ModuleTree, SyntaxError> {
    let body = <rustpython_ast::Suite as rustpython_parser::Parse>::parse(text, "<module>").map_err(|err| {
        let offset = usize::from(err.offset).min(text.len());
        let (line, column) = line_column(text, offset);
        SyntaxError {
            line,
            column,
            offset,
            message: err.error.to_string(),
        }
    })?;
    Ok(ModuleTree {
        body,
        source: text.to_owned(),
    })
}

impl ModuleTree {
    pub fn body(&self) -> &[Stmt] {
        &self.body
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn into_body(self) -> Vec<Stmt> {
        self.body
    }

    /// Source text covered by `range`.
    pub fn slice(&self, range: TextRange) -> &str {
        &self.source[usize::from(range.start())..usize::from(range.end())]
    }

    pub fn line_column(&self, offset: usize) -> (usize, usize) {
        line_column(&self.source, offset)
    }

    pub fn unparse(&self) -> Result<String, UnparseError> {
        unparse_stmts(&self.body, 0)
    }

    /// True when both trees have the same shape and contents, ignoring
    /// source positions.
    pub fn structurally_equal(&self, other: &ModuleTree) -> bool {
        structurally_equal(&self.body, &other.body)
    }
}

pub(crate) fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let mut offset = offset.min(text.len());
    while !text.is_char_boundary(offset) {
        offset -= 1;
    }
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let column = before[line_start..].chars().count() + 1;
    (line, column)
}

/// Statement list with every source range erased; `PartialEq` on it is
/// structural equality.
pub type Shape = Vec<Stmt<()>>;

struct EraseRanges;

impl Fold<TextRange> for EraseRanges {
    type TargetU = ();
    type Error = Infallible;
    type UserContext = ();

    fn will_map_user(&mut self, _user: &TextRange) -> Self::UserContext {}

    fn map_user(&mut self, _user: TextRange, _context: ()) -> Result<(), Infallible> {
        Ok(())
    }
}

pub fn shape(stmts: &[Stmt]) -> Shape {
    let mut folder = EraseRanges;
    stmts
        .iter()
        .cloned()
        .map(|s| match folder.fold_stmt(s) {
            Ok(s) => s,
            Err(never) => match never {},
        })
        .collect()
}

pub fn structurally_equal(a: &[Stmt], b: &[Stmt]) -> bool {
    a.len() == b.len() && shape(a) == shape(b)
}

impl fmt::Display for ModuleTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.unparse() {
            Ok(text) => f.write_str(&text),
            Err(_) => f.write_str(&self.source),
        }
    }
}
