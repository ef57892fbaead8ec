//! Builtin identifier swap datasets: corpus acquisition, scope-aware
//! extraction, α-equivalent transforms, dataset generation, model
//! evaluation and scaling statistics.
//!
//! Shared types are re-exported at the crate root.

pub mod artifact;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod http;
pub mod oracle;
pub mod pyast;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod transform;

pub use corpus::{RepoManifest, SourceFile};
pub use dataset::{ClassificationExample, Dataset, GenerationConfig, SkipReason};
pub use eval::{Backend, EvalReport, ExampleResult, ModelSpec};
pub use oracle::{EquivalenceCase, EquivalenceVerdict};
pub use pyast::{BuiltinCatalog, ModuleTree, SourceFunction};
pub use stats::{ScalingPoint, ScalingReport};
pub use transform::{Permutation, SwapMode, SwapSpec};
