//! Offline language models over bytes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Score, ScoreError, Scorer};

/// Every byte token has probability `1/V`.
#[derive(Clone, Copy, Debug)]
pub struct UniformModel {
    pub vocab: u32,
}

impl Default for UniformModel {
    fn default() -> Self {
        Self { vocab: 256 }
    }
}

impl Scorer for UniformModel {
    fn score(&self, _prompt: &str, continuation: &str) -> Result<Score, ScoreError> {
        let tokens = continuation.len();
        Ok(Score {
            logp: tokens as f64 * (1.0 / f64::from(self.vocab)).ln(),
            tokens,
        })
    }
}

pub const MAX_NGRAM_ORDER: usize = 8;
const ALPHABET: f64 = 256.0;
/// Context padding before the first byte of a text.
const PAD: u8 = 0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NgramError {
    #[error("n-gram order must be between 1 and {MAX_NGRAM_ORDER}, got {0}")]
    Order(usize),
    #[error("smoothing constant must be positive and finite, got {0}")]
    Smoothing(f64),
    #[error("training corpus is empty")]
    EmptyCorpus,
}

/// Character (byte) n-gram model with add-k smoothing over all 256 bytes.
///
/// A context is the previous `order - 1` bytes, with texts padded by NUL on
/// the left.
#[derive(Clone, Debug)]
pub struct NgramModel {
    order: usize,
    k: f64,
    /// `(context << 8) | next` → count.
    pairs: HashMap<u64, u32>,
    /// context → count.
    contexts: HashMap<u64, u32>,
    training_bytes: usize,
}

#[derive(Serialize, Deserialize)]
struct NgramFile {
    order: usize,
    k: f64,
    pairs: Vec<(u64, u32)>,
    training_bytes: usize,
}

fn push(ctx: u64, byte: u8, width: usize) -> u64 {
    if width == 0 {
        return 0;
    }
    let mask = if width >= 8 { u64::MAX } else { (1u64 << (8 * width)) - 1 };
    ((ctx << 8) | u64::from(byte)) & mask
}

impl NgramModel {
    pub fn train<S: AsRef<str>>(texts: &[S], order: usize, k: f64) -> Result<Self, NgramError> {
        if order == 0 || order > MAX_NGRAM_ORDER {
            return Err(NgramError::Order(order));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(NgramError::Smoothing(k));
        }
        let total: usize = texts.iter().map(|t| t.as_ref().len()).sum();
        if total == 0 {
            return Err(NgramError::EmptyCorpus);
        }
        let mut model = Self {
            order,
            k,
            pairs: HashMap::new(),
            contexts: HashMap::new(),
            training_bytes: total,
        };
        for text in texts {
            let mut ctx = model.start();
            for &b in text.as_ref().as_bytes() {
                *model.pairs.entry((ctx << 8) | u64::from(b)).or_default() += 1;
                *model.contexts.entry(ctx).or_default() += 1;
                ctx = push(ctx, b, order - 1);
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    fn start(&self) -> u64 {
        (0..self.order - 1).fold(0, |c, _| push(c, PAD, self.order - 1))
    }

    fn context_of(&self, text: &[u8]) -> u64 {
        text.iter()
            .fold(self.start(), |c, &b| push(c, b, self.order - 1))
    }

    fn logp_next(&self, ctx: u64, byte: u8) -> f64 {
        let pair = self.pairs.get(&((ctx << 8) | u64::from(byte))).copied().unwrap_or(0);
        let total = self.contexts.get(&ctx).copied().unwrap_or(0);
        ((f64::from(pair) + self.k) / (f64::from(total) + ALPHABET * self.k)).ln()
    }

    /// Probability of `byte` after `context` (raw bytes, padded as in training).
    pub fn prob(&self, context: &[u8], byte: u8) -> f64 {
        self.logp_next(self.context_of(context), byte).exp()
    }

    /// Sum of `ln p(byte | context)` over `text` following `history`.
    pub fn logp(&self, history: &[u8], text: &[u8]) -> f64 {
        let mut ctx = self.context_of(history);
        let mut sum = 0.0;
        for &b in text {
            sum += self.logp_next(ctx, b);
            ctx = push(ctx, b, self.order - 1);
        }
        sum
    }

    /// Per-byte perplexity of `text` on its own.
    pub fn perplexity(&self, text: &[u8]) -> f64 {
        if text.is_empty() {
            return 1.0;
        }
        (-self.logp(&[], text) / text.len() as f64).exp()
    }

    fn sorted_pairs(&self) -> Vec<(u64, u32)> {
        let mut pairs: Vec<_> = self.pairs.iter().map(|(k, v)| (*k, *v)).collect();
        pairs.sort_unstable();
        pairs
    }

    /// Content hash of the trained counts and hyperparameters.
    pub fn model_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.order as u64).to_le_bytes());
        h.update(self.k.to_le_bytes());
        for (k, v) in self.sorted_pairs() {
            h.update(k.to_le_bytes());
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&NgramFile {
            order: self.order,
            k: self.k,
            pairs: self.sorted_pairs(),
            training_bytes: self.training_bytes,
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: NgramFile = serde_json::from_str(text)?;
        let mut contexts = HashMap::new();
        for (key, count) in &file.pairs {
            *contexts.entry(key >> 8).or_default() += count;
        }
        Ok(Self {
            order: file.order,
            k: file.k,
            pairs: file.pairs.into_iter().collect(),
            contexts,
            training_bytes: file.training_bytes,
        })
    }
}

impl Scorer for NgramModel {
    fn score(&self, prompt: &str, continuation: &str) -> Result<Score, ScoreError> {
        Ok(Score {
            logp: self.logp(prompt.as_bytes(), continuation.as_bytes()),
            tokens: continuation.len(),
        })
    }
}
