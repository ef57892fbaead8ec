use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pyast::BuiltinCatalog;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PermutationError {
    #[error("{0:?} is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("mapping is not a bijection: {0:?} has no preimage in the support")]
    NotBijective(String),
    #[error("cycle repeats {0:?}")]
    RepeatedInCycle(String),
}

/// A bijection on identifiers that moves only finitely many names.
///
/// Fixed points are never stored, so two permutations are equal exactly when
/// they act identically.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct Permutation {
    map: BTreeMap<String, String>,
}

impl Permutation {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(mapping: BTreeMap<String, String>) -> Result<Self, PermutationError> {
        for name in mapping.keys().chain(mapping.values()) {
            if !crate::pyast::is_identifier(name) {
                return Err(PermutationError::InvalidIdentifier(name.clone()));
            }
        }
        let map: BTreeMap<_, _> = mapping.into_iter().filter(|(k, v)| k != v).collect();
        let domain: BTreeSet<&String> = map.keys().collect();
        let image: BTreeSet<&String> = map.values().collect();
        if let Some(stray) = image.difference(&domain).next() {
            return Err(PermutationError::NotBijective((*stray).clone()));
        }
        if image.len() != domain.len() {
            let missing = domain.difference(&image).next().expect("sizes differ");
            return Err(PermutationError::NotBijective((*missing).clone()));
        }
        Ok(Self { map })
    }

    pub fn transposition(a: &str, b: &str) -> Result<Self, PermutationError> {
        Self::cycle(&[a, b])
    }

    /// The cycle `names[0] → names[1] → … → names[0]`.
    pub fn cycle(names: &[&str]) -> Result<Self, PermutationError> {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(*n) {
                return Err(PermutationError::RepeatedInCycle((*n).to_owned()));
            }
        }
        let mut map = BTreeMap::new();
        for (i, n) in names.iter().enumerate() {
            let next = names[(i + 1) % names.len()];
            map.insert((*n).to_owned(), next.to_owned());
        }
        Self::new(map)
    }

    pub fn apply<'a>(&'a self, name: &'a str) -> &'a str {
        self.map.get(name).map_or(name, String::as_str)
    }

    /// Names moved by the permutation, in lexicographic order.
    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn support_len(&self) -> usize {
        self.map.len()
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    pub fn is_transposition(&self) -> bool {
        self.map.len() == 2
    }

    /// `self · other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let names: BTreeSet<&String> = self.map.keys().chain(other.map.keys()).collect();
        let map = names
            .into_iter()
            .map(|n| (n.clone(), self.apply(other.apply(n)).to_owned()))
            .filter(|(k, v)| k != v)
            .collect();
        Permutation { map }
    }

    pub fn invert(&self) -> Permutation {
        Permutation {
            map: self.map.iter().map(|(k, v)| (v.clone(), k.clone())).collect(),
        }
    }

    /// True when every moved name belongs to `catalog`.
    pub fn within(&self, catalog: &BuiltinCatalog) -> bool {
        self.support().all(|n| catalog.contains(n))
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.map
    }
}

impl TryFrom<BTreeMap<String, String>> for Permutation {
    type Error = PermutationError;

    fn try_from(map: BTreeMap<String, String>) -> Result<Self, Self::Error> {
        Self::new(map)
    }
}

impl From<Permutation> for BTreeMap<String, String> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}→{v}")?;
        }
        f.write_str("}")
    }
}

pub fn identity() -> Permutation {
    Permutation::identity()
}

pub fn compose(g: &Permutation, h: &Permutation) -> Permutation {
    g.compose(h)
}

pub fn invert(g: &Permutation) -> Permutation {
    g.invert()
}
