use std::collections::BTreeSet;
use std::path::Path;

const EMBEDDED: &str = include_str!("../../data/builtins-py38.txt");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog is empty")]
    Empty,
    #[error("line {line}: {name:?} is not a valid identifier")]
    InvalidIdentifier { line: usize, name: String },
    #[error("line {line}: duplicate entry {name:?}")]
    Duplicate { line: usize, name: String },
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

/// The set of callable builtin identifiers eligible for swapping.
///
/// The text format is one identifier per line; `#` starts a comment line and
/// a `# version: <tag>` comment names the catalog version.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuiltinCatalog {
    names: BTreeSet<String>,
    version: String,
}

impl BuiltinCatalog {
    /// The shipped catalog: CPython 3.8 builtins that are callable, without
    /// exception classes.
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED).expect("embedded catalog is well formed")
    }

    pub fn from_file(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path)?;
        let mut catalog = Self::parse(&text)?;
        if catalog.version == "unversioned" {
            catalog.version = format!("file:{}", path.display());
        }
        Ok(catalog)
    }

    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut names = BTreeSet::new();
        let mut version = String::from("unversioned");
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(tag) = comment.trim().strip_prefix("version:") {
                    version = tag.trim().to_owned();
                }
                continue;
            }
            if !is_identifier(line) {
                return Err(CatalogError::InvalidIdentifier {
                    line: idx + 1,
                    name: line.to_owned(),
                });
            }
            if !names.insert(line.to_owned()) {
                return Err(CatalogError::Duplicate {
                    line: idx + 1,
                    name: line.to_owned(),
                });
            }
        }
        if names.is_empty() {
            return Err(CatalogError::Empty);
        }
        Ok(Self { names, version })
    }

    pub fn from_names<I, S>(names: I, version: impl Into<String>) -> Result<Self, CatalogError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for (idx, name) in names.into_iter().enumerate() {
            let name = name.into();
            if !is_identifier(&name) {
                return Err(CatalogError::InvalidIdentifier {
                    line: idx + 1,
                    name,
                });
            }
            if !set.insert(name.clone()) {
                return Err(CatalogError::Duplicate {
                    line: idx + 1,
                    name,
                });
            }
        }
        if set.is_empty() {
            return Err(CatalogError::Empty);
        }
        Ok(Self {
            names: set,
            version: version.into(),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Copy of this catalog with one more name.
    pub fn with_name(&self, name: &str) -> Result<Self, CatalogError> {
        if !is_identifier(name) {
            return Err(CatalogError::InvalidIdentifier {
                line: 0,
                name: name.to_owned(),
            });
        }
        let mut names = self.names.clone();
        names.insert(name.to_owned());
        Ok(Self {
            names,
            version: format!("{}+{name}", self.version),
        })
    }
}

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if",
    "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

/// ASCII-and-Unicode-letter identifier check, excluding hard keywords.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first == '_' || first.is_alphabetic())
        && chars.all(|c| c == '_' || c.is_alphanumeric())
        && !KEYWORDS.contains(&s)
}
