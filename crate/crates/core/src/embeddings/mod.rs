//! CBOW word embeddings trained on the noisy corpus, plus cosine
//! nearest-neighbor queries. Querying a correctly spelled word surfaces its
//! OCR-corrupted variants among the neighbors, which is what the extraction
//! stage exploits.

mod cbow;
mod io;

pub use cbow::{
    cbow_loss, cbow_loss_grad, train_cbow, CbowConfig, CbowExample, CbowTrainStats,
};

use std::collections::HashMap;

use crate::corpus::Token;
use crate::error::{EmendError, Result};

/// Vocabulary plus dense input/output vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vec<Token>,
    index: HashMap<Token, usize>,
    dim: usize,
    /// Row-major |V| x d. Input vectors are the ones neighbor queries use.
    input_vectors: Vec<f64>,
    output_vectors: Vec<f64>,
    trained_epochs: u32,
}

impl EmbeddingModel {
    /// Assembles a model from raw parts, validating the type invariants:
    /// duplicate-free vocabulary, consistent matrix shapes, finite entries.
    pub fn from_parts(
        vocab: Vec<Token>,
        dim: usize,
        input_vectors: Vec<f64>,
        output_vectors: Vec<f64>,
    ) -> Result<EmbeddingModel> {
        if dim == 0 {
            return Err(EmendError::Config("embedding dimension must be > 0".into()));
        }
        let expected = vocab.len() * dim;
        if input_vectors.len() != expected || output_vectors.len() != expected {
            return Err(EmendError::Config(format!(
                "embedding matrices must be |V| x d = {} values, got {} and {}",
                expected,
                input_vectors.len(),
                output_vectors.len()
            )));
        }
        if input_vectors.iter().chain(&output_vectors).any(|v| !v.is_finite()) {
            return Err(EmendError::Config(
                "embedding matrices contain non-finite values".into(),
            ));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, token) in vocab.iter().enumerate() {
            if index.insert(token.clone(), i).is_some() {
                return Err(EmendError::Config(format!(
                    "duplicate vocabulary entry {token:?}"
                )));
            }
        }
        Ok(EmbeddingModel {
            vocab,
            index,
            dim,
            input_vectors,
            output_vectors,
            trained_epochs: 0,
        })
    }

    pub(crate) fn with_trained_epochs(mut self, epochs: u32) -> EmbeddingModel {
        self.trained_epochs = epochs;
        self
    }

    pub fn vocab(&self) -> &[Token] {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn trained_epochs(&self) -> u32 {
        self.trained_epochs
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn input_vector(&self, index: usize) -> &[f64] {
        &self.input_vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn output_vector(&self, index: usize) -> &[f64] {
        &self.output_vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub(crate) fn input_matrix(&self) -> &[f64] {
        &self.input_vectors
    }

    pub(crate) fn output_matrix(&self) -> &[f64] {
        &self.output_vectors
    }

    /// Precomputes a normalized copy of the input vectors so repeated
    /// neighbor queries are plain dot products.
    pub fn neighbor_index(&self) -> NeighborIndex<'_> {
        let mut normalized = self.input_vectors.clone();
        let mut zero_norm = vec![false; self.vocab.len()];
        for (row, is_zero) in zero_norm.iter_mut().enumerate() {
            let slice = &mut normalized[row * self.dim..(row + 1) * self.dim];
            let norm = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                *is_zero = true;
            } else {
                for v in slice {
                    *v /= norm;
                }
            }
        }
        NeighborIndex {
            model: self,
            normalized,
            zero_norm,
        }
    }

    /// Convenience one-off query; builds a fresh index per call.
    pub fn most_similar(&self, query: &Token, k: usize) -> Result<NeighborList> {
        self.neighbor_index().most_similar(query, k)
    }
}

/// dot(a, b) / (|a| |b|). Errors on zero-norm input.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len(), "cosine requires equal dimensions");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(EmendError::ZeroNorm);
    }
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// Ranked cosine neighbors of a query token (query itself excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    query: Token,
    entries: Vec<(Token, f64)>,
}

impl NeighborList {
    pub fn query(&self) -> &Token {
        &self.query
    }

    /// Neighbors sorted by descending cosine, ties lexicographic.
    pub fn entries(&self) -> &[(Token, f64)] {
        &self.entries
    }
}

/// Normalized view of a model's input vectors for repeated queries.
pub struct NeighborIndex<'a> {
    model: &'a EmbeddingModel,
    normalized: Vec<f64>,
    zero_norm: Vec<bool>,
}

impl NeighborIndex<'_> {
    /// The `k` highest-cosine vocabulary tokens against the query's input
    /// vector. Ties break lexicographically; `k` is clamped to |V| - 1.
    /// Zero-norm candidates are skipped; a zero-norm query is an error.
    pub fn most_similar(&self, query: &Token, k: usize) -> Result<NeighborList> {
        let dim = self.model.dim;
        let query_idx = self
            .model
            .token_index(query.as_str())
            .ok_or_else(|| EmendError::OutOfVocabulary(query.to_string()))?;
        if self.zero_norm[query_idx] {
            return Err(EmendError::ZeroNorm);
        }
        let query_row = &self.normalized[query_idx * dim..(query_idx + 1) * dim];

        let mut scored: Vec<(f64, &Token)> = Vec::with_capacity(self.model.len() - 1);
        for i in 0..self.model.len() {
            if i == query_idx || self.zero_norm[i] {
                continue;
            }
            let row = &self.normalized[i * dim..(i + 1) * dim];
            let cos: f64 = query_row.iter().zip(row).map(|(x, y)| x * y).sum();
            scored.push((cos.clamp(-1.0, 1.0), &self.model.vocab[i]));
        }
        scored.sort_unstable_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("cosines are finite")
                .then_with(|| a.1.cmp(b.1))
        });
        scored.truncate(k);

        Ok(NeighborList {
            query: query.clone(),
            entries: scored
                .into_iter()
                .map(|(cos, token)| (token.clone(), cos))
                .collect(),
        })
    }
}
