//! Token embedding providers: frozen seeded-hash vectors, and a trainable
//! lookup table that falls back to the hash vectors for unseen tokens.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub trait EmbeddingProvider {
    fn dim(&self) -> usize;

    /// Writes the vector for `token` into `out` (length `dim`).
    fn embed(&self, token: &str, out: &mut [f64]);

    /// Row of the trainable table backing `token`, if there is one.
    fn trainable_row(&self, _token: &str) -> Option<usize> {
        None
    }
}

/// Standard-normal vectors seeded by a hash of (seed, token).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashEmbeddings {
    pub dim: usize,
    pub seed: u64,
}

impl EmbeddingProvider for HashEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str, out: &mut [f64]) {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        for x in out.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTable {
    pub vocab: BTreeMap<String, usize>,
    /// vocab × dim
    pub table: Array2<f64>,
    pub fallback: HashEmbeddings,
}

impl TokenTable {
    /// Rows start at the hash vectors of their tokens.
    pub fn new<I: IntoIterator<Item = String>>(tokens: I, fallback: HashEmbeddings) -> Self {
        let mut vocab = BTreeMap::new();
        for t in tokens {
            let next = vocab.len();
            vocab.entry(t).or_insert(next);
        }
        let mut table = Array2::zeros((vocab.len(), fallback.dim));
        for (t, &row) in &vocab {
            fallback.embed(t, table.row_mut(row).as_slice_mut().expect("row is contiguous"));
        }
        TokenTable { vocab, table, fallback }
    }

    pub fn zeros_like(&self) -> Self {
        TokenTable { vocab: self.vocab.clone(), table: Array2::zeros(self.table.raw_dim()), fallback: self.fallback }
    }
}

impl EmbeddingProvider for TokenTable {
    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn embed(&self, token: &str, out: &mut [f64]) {
        match self.vocab.get(token) {
            Some(&row) => out.copy_from_slice(self.table.row(row).as_slice().expect("row is contiguous")),
            None => self.fallback.embed(token, out),
        }
    }

    fn trainable_row(&self, token: &str) -> Option<usize> {
        self.vocab.get(token).copied()
    }
}
