//! Identifier permutations acting on program fragments.
//!
//! A [`Permutation`] acts on a statement list by renaming every read of a
//! name in its support. The action only preserves meaning when the renamed
//! names are free in the fragment, so [`apply_permutation`] refuses
//! fragments that bind any of them.

mod permutation;

use std::convert::Infallible;

use rustpython_ast::text_size::TextRange;
use rustpython_ast::{ExprContext, ExprName, Fold, Identifier, Stmt};
use serde::{Deserialize, Serialize};

pub use permutation::{compose, identity, invert, Permutation, PermutationError};

use crate::pyast::{collect_usage, is_identifier, BindingSite, SourceFunction};
use crate::rng::DetRng;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{} is bound in the fragment ({:?} at byte {})", .0.name, .0.kind, .0.offset)]
pub struct ShadowedName(pub BindingSite);

/// Renames every read of a name in `g`'s support.
pub fn apply_permutation(fragment: &[Stmt], g: &Permutation) -> Result<Vec<Stmt>, ShadowedName> {
    if g.is_identity() {
        return Ok(fragment.to_vec());
    }
    let usage = collect_usage(fragment);
    if let Some(site) = usage
        .bindings
        .iter()
        .find(|b| g.apply(&b.name) != b.name)
    {
        return Err(ShadowedName(site.clone()));
    }
    let mut folder = Rename(g);
    Ok(fragment
        .iter()
        .cloned()
        .map(|s| match folder.fold_stmt(s) {
            Ok(s) => s,
            Err(never) => match never {},
        })
        .collect())
}

struct Rename<'a>(&'a Permutation);

impl Fold<TextRange> for Rename<'_> {
    type TargetU = TextRange;
    type Error = Infallible;
    type UserContext = ();

    fn will_map_user(&mut self, _user: &TextRange) -> Self::UserContext {}

    fn map_user(&mut self, user: TextRange, _context: ()) -> Result<TextRange, Infallible> {
        Ok(user)
    }

    fn fold_expr_name(&mut self, node: ExprName) -> Result<ExprName, Infallible> {
        if node.ctx != ExprContext::Load {
            return Ok(node);
        }
        let renamed = self.0.apply(node.id.as_str());
        if renamed == node.id.as_str() {
            return Ok(node);
        }
        Ok(ExprName {
            id: Identifier::new(renamed),
            ..node
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapMode {
    /// Swap two builtin functions.
    Builtin,
    /// Swap two module-level functions or from-imported names.
    Toplevel,
}

impl std::str::FromStr for SwapMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "builtin" => Ok(Self::Builtin),
            "toplevel" => Ok(Self::Toplevel),
            other => Err(format!("unknown mode {other:?}; expected builtin or toplevel")),
        }
    }
}

impl std::fmt::Display for SwapMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Builtin => "builtin",
            Self::Toplevel => "toplevel",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SwapError {
    #[error("swap needs two distinct names, got {0:?} twice")]
    SameName(String),
    #[error("{0:?} is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("only {found} eligible name(s); two are needed")]
    TooFewNames { found: usize },
}

/// An exchange of two identifiers, plus the seed that chose it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwapSpec {
    pub a: String,
    pub b: String,
    pub seed: u64,
}

impl SwapSpec {
    pub fn new(a: &str, b: &str, seed: u64) -> Result<Self, SwapError> {
        for n in [a, b] {
            if !is_identifier(n) {
                return Err(SwapError::InvalidIdentifier(n.to_owned()));
            }
        }
        if a == b {
            return Err(SwapError::SameName(a.to_owned()));
        }
        Ok(Self {
            a: a.to_owned(),
            b: b.to_owned(),
            seed,
        })
    }

    /// The same pair with `a < b`.
    pub fn sorted(&self) -> Self {
        if self.a <= self.b {
            self.clone()
        } else {
            Self {
                a: self.b.clone(),
                b: self.a.clone(),
                seed: self.seed,
            }
        }
    }

    pub fn as_permutation(&self) -> Permutation {
        Permutation::transposition(&self.a, &self.b).expect("validated at construction")
    }

    pub fn involves(&self, name: &str) -> bool {
        self.a == name || self.b == name
    }
}

pub fn render_swap_statement(s: &SwapSpec) -> String {
    format!("{a}, {b} = {b}, {a}\n", a = s.a, b = s.b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("the identity needs no compensation statement")]
pub struct EmptySupport;

/// Tuple assignment that rebinds each support name `a` to the value `g`
/// moves into it: the left side lists `g(a)` over the sorted support.
pub fn render_compensation_statement(g: &Permutation) -> Result<String, EmptySupport> {
    if g.is_identity() {
        return Err(EmptySupport);
    }
    let support: Vec<&str> = g.support().collect();
    if let [a, b] = support[..] {
        return Ok(render_swap_statement(&SwapSpec {
            a: a.to_owned(),
            b: b.to_owned(),
            seed: 0,
        }));
    }
    let lhs: Vec<&str> = support.iter().map(|n| g.apply(n)).collect();
    Ok(format!("{} = {}\n", lhs.join(", "), support.join(", ")))
}

/// Sorted names `choose_swap` may pick from.
pub fn eligible_names(f: &SourceFunction, mode: SwapMode) -> Vec<&str> {
    let refs = match mode {
        SwapMode::Builtin => &f.builtin_refs,
        SwapMode::Toplevel => &f.toplevel_refs,
    };
    refs.keys().map(String::as_str).collect()
}

/// Why `name` may not take part in a swap of `f` under `mode`, if it may not.
///
/// Local bindings and header reads always block. Module-level bindings block
/// builtin swaps only; in toplevel mode they are what gets swapped, except
/// for the function's own name.
pub fn blocking_site<'a>(f: &'a SourceFunction, name: &str, mode: SwapMode) -> Option<&'a BindingSite> {
    match mode {
        SwapMode::Builtin => f.builtin_exclusion(name),
        SwapMode::Toplevel => f.local_exclusions.get(name).or_else(|| {
            (name == f.name)
                .then(|| f.module_scope.bindings.get(name))
                .flatten()
        }),
    }
}

/// Draws an unordered pair uniformly from the eligible names. The result is
/// determined by `(eligible names, seed, mode)` and returned sorted.
pub fn choose_swap(f: &SourceFunction, seed: u64, mode: SwapMode) -> Result<SwapSpec, SwapError> {
    let names = eligible_names(f, mode);
    let n = names.len() as u64;
    if n < 2 {
        return Err(SwapError::TooFewNames {
            found: names.len(),
        });
    }
    let mode_tag = mode.to_string();
    let mut rng = DetRng::new(&["choose-swap".into(), mode_tag.as_str().into(), seed.into()]);
    let (i, j) = unrank_pair(rng.below(n * (n - 1) / 2), n);
    SwapSpec::new(names[i as usize], names[j as usize], seed)
}

/// The `k`-th pair `(i, j)`, `i < j`, in row-major order over `n` items.
fn unrank_pair(mut k: u64, n: u64) -> (u64, u64) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}
