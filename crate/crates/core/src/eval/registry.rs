//! Built-in model registry.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    ApiCompletion,
    ApiChat,
    MockUniform,
    MockNgram,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "api-completion" => Self::ApiCompletion,
            "api-chat" => Self::ApiChat,
            "mock-uniform" => Self::MockUniform,
            "mock-ngram" => Self::MockNgram,
            other => {
                return Err(format!(
                    "unknown backend {other:?}; expected api-completion, api-chat, mock-uniform or mock-ngram"
                ))
            }
        })
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ApiCompletion => "api-completion",
            Self::ApiChat => "api-chat",
            Self::MockUniform => "mock-uniform",
            Self::MockNgram => "mock-ngram",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub family: String,
    /// Parameters in billions, when published.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_b: Option<f64>,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("model {name:?} has non-positive size {size}")]
    Size { name: String, size: f64 },
    #[error("duplicate model {family}/{name}")]
    Duplicate { family: String, name: String },
    #[error("unknown model {0:?}")]
    Unknown(String),
    #[error("model name {0:?} is ambiguous; qualify it as family/name")]
    Ambiguous(String),
    #[error("registry file: {0}")]
    Parse(String),
}

impl ModelSpec {
    pub fn new(name: &str, family: &str, size_b: Option<f64>, backend: Backend) -> Self {
        Self {
            name: name.to_owned(),
            family: family.to_owned(),
            size_b,
            backend,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Registry {
    models: Vec<ModelSpec>,
}

const COMPLETION: &[(&str, &[(&str, f64)])] = &[
    ("gpt-3", &[("ada", 0.35), ("babbage", 1.3), ("curie", 6.7), ("davinci", 175.0)]),
    (
        "instructgpt",
        &[
            ("text-ada-001", 0.35),
            ("text-babbage-001", 1.3),
            ("text-curie-001", 6.7),
            ("text-davinci-001", 175.0),
        ],
    ),
    (
        "gpt-3.5",
        &[
            ("code-cushman-001", 12.0),
            ("code-davinci-002", 175.0),
            ("text-davinci-002", 175.0),
            ("text-davinci-003", 175.0),
        ],
    ),
    (
        "opt",
        &[
            ("opt-125m", 0.125),
            ("opt-350m", 0.35),
            ("opt-1.3b", 1.3),
            ("opt-2.7b", 2.7),
            ("opt-6.7b", 6.7),
            ("opt-13b", 13.0),
        ],
    ),
    (
        "codegen-multi",
        &[
            ("codegen-350M-multi", 0.35),
            ("codegen-2B-multi", 2.0),
            ("codegen-6B-multi", 6.0),
            ("codegen-16B-multi", 16.0),
        ],
    ),
    (
        "codegen-mono",
        &[
            ("codegen-350M-mono", 0.35),
            ("codegen-2B-mono", 2.0),
            ("codegen-6B-mono", 6.0),
            ("codegen-16B-mono", 16.0),
        ],
    ),
    (
        "flan-t5",
        &[
            ("flan-t5-small", 0.08),
            ("flan-t5-base", 0.25),
            ("flan-t5-large", 0.78),
            ("flan-t5-xl", 3.0),
            ("flan-t5-xxl", 11.0),
        ],
    ),
];

const CHAT: &[(&str, &[&str])] = &[
    ("openai-chat", &["gpt-3.5-turbo", "gpt-4"]),
    ("anthropic-chat", &["claude-instant", "claude"]),
];

impl Default for Registry {
    fn default() -> Self {
        let mut models = Vec::new();
        for (family, sizes) in COMPLETION {
            for (name, size) in *sizes {
                models.push(ModelSpec::new(name, family, Some(*size), Backend::ApiCompletion));
            }
        }
        for (family, names) in CHAT {
            for name in *names {
                models.push(ModelSpec::new(name, family, None, Backend::ApiChat));
            }
        }
        models.push(ModelSpec::new("uniform", "mock", None, Backend::MockUniform));
        models.push(ModelSpec::new("ngram", "mock", None, Backend::MockNgram));
        Self::new(models).expect("built-in registry is valid")
    }
}

impl Registry {
    pub fn new(models: Vec<ModelSpec>) -> Result<Self, RegistryError> {
        let mut seen = BTreeSet::new();
        for m in &models {
            if let Some(size) = m.size_b {
                if !(size > 0.0 && size.is_finite()) {
                    return Err(RegistryError::Size {
                        name: m.name.clone(),
                        size,
                    });
                }
            }
            if !seen.insert((m.family.clone(), m.name.clone())) {
                return Err(RegistryError::Duplicate {
                    family: m.family.clone(),
                    name: m.name.clone(),
                });
            }
        }
        Ok(Self { models })
    }

    /// The built-in table with entries from a JSON list of [`ModelSpec`]
    /// replacing or extending it.
    pub fn with_overrides(mut self, json: &str) -> Result<Self, RegistryError> {
        let extra: Vec<ModelSpec> =
            serde_json::from_str(json).map_err(|e| RegistryError::Parse(e.to_string()))?;
        for m in extra {
            self.models.retain(|x| !(x.family == m.family && x.name == m.name));
            self.models.push(m);
        }
        Self::new(self.models)
    }

    pub fn models(&self) -> &[ModelSpec] {
        &self.models
    }

    pub fn family(&self, family: &str) -> Vec<&ModelSpec> {
        self.models.iter().filter(|m| m.family == family).collect()
    }

    /// Looks up `name` or `family/name`.
    pub fn get(&self, query: &str) -> Result<&ModelSpec, RegistryError> {
        let hits: Vec<&ModelSpec> = match query.split_once('/') {
            Some((family, name)) => self
                .models
                .iter()
                .filter(|m| m.family == family && m.name == name)
                .collect(),
            None => self.models.iter().filter(|m| m.name == query).collect(),
        };
        match hits[..] {
            [one] => Ok(one),
            [] => Err(RegistryError::Unknown(query.to_owned())),
            _ => Err(RegistryError::Ambiguous(query.to_owned())),
        }
    }
}
