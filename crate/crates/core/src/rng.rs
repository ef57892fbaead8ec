//! Named, versioned deterministic randomness.
//!
//! Every random decision is drawn from a ChaCha20 stream seeded by SHA-256
//! over [`RNG_VERSION`] and a list of length-prefixed key parts, so each
//! decision depends only on its own key and never on evaluation order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub const RNG_VERSION: &str = "swapbench-chacha20-sha256-v1";

pub struct DetRng(ChaCha20Rng);

/// A key part; integers are encoded little-endian.
pub enum KeyPart<'a> {
    Str(&'a str),
    U64(u64),
}

impl<'a> From<&'a str> for KeyPart<'a> {
    fn from(s: &'a str) -> Self {
        KeyPart::Str(s)
    }
}

impl From<u64> for KeyPart<'_> {
    fn from(v: u64) -> Self {
        KeyPart::U64(v)
    }
}

pub fn derive_seed(parts: &[KeyPart<'_>]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((RNG_VERSION.len() as u64).to_le_bytes());
    h.update(RNG_VERSION.as_bytes());
    for part in parts {
        match part {
            KeyPart::Str(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            KeyPart::U64(v) => {
                h.update([1u8]);
                h.update(v.to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

/// First eight bytes of [`derive_seed`] as an integer.
pub fn derive_u64(parts: &[KeyPart<'_>]) -> u64 {
    let seed = derive_seed(parts);
    u64::from_le_bytes(seed[..8].try_into().expect("8 bytes"))
}

impl DetRng {
    pub fn new(parts: &[KeyPart<'_>]) -> Self {
        DetRng(ChaCha20Rng::from_seed(derive_seed(parts)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound` by Lemire's multiply-and-reject method.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
            }
        }
        (m >> 64) as u64
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// `k` distinct indices from `0..n`, uniformly, in draw order
    /// (partial Fisher-Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
