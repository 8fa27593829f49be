//! Local, global and hybrid estimates for a single new token.
//!
//! Weights depend only on the tokenizers and the auxiliary space, so they
//! are computed once per token as [`WeightedRows`] and then applied to
//! each embedding matrix (input, and output when untied).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::auxiliary::{AuxEmbeddingStore, AuxError, KnnIndex};
use crate::bpe::BpeTokenizer;
use crate::config::LengthUnit;
use crate::math::{self, softmax, softmax_with_temperature};
use crate::vocab::TokenId;

use super::matrix::EmbeddingMatrix;

/// A convex combination of old embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRows {
    pub ids: Vec<TokenId>,
    pub weights: Vec<f64>,
}

impl WeightedRows {
    /// `Σ weights[j] · matrix[ids[j]]`, accumulated in f64.
    pub fn apply(&self, matrix: &EmbeddingMatrix) -> Vec<f32> {
        let mut acc = vec![0f64; matrix.dim()];
        for (&id, &w) in self.ids.iter().zip(&self.weights) {
            for (a, &x) in acc.iter_mut().zip(matrix.row(id.index())) {
                *a += w * f64::from(x);
            }
        }
        acc.into_iter().map(|x| x as f32).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub vector: Vec<f32>,
    pub weights: WeightedRows,
}

/// Text and raw bytes of a token, as the heuristics see it.
#[derive(Debug, Clone)]
pub struct TokenText {
    pub text: String,
    pub bytes: Vec<u8>,
}

impl TokenText {
    pub fn from_token(tok: &BpeTokenizer, id: TokenId) -> Option<Self> {
        let bytes = tok.token_bytes(id)?.to_vec();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        Some(Self { text, bytes })
    }

    pub fn from_text(s: &str) -> Self {
        Self { text: s.to_owned(), bytes: s.as_bytes().to_vec() }
    }

    fn len(&self, unit: LengthUnit) -> usize {
        match unit {
            LengthUnit::Chars => self.text.chars().count(),
            LengthUnit::Bytes => self.bytes.len(),
        }
    }
}

/// Sub-tokens of `new` under the old tokenizer, with their texts.
fn decompose(new: &TokenText, old_tok: &BpeTokenizer) -> Vec<(TokenId, TokenText)> {
    old_tok
        .encode_bytes(&new.bytes)
        .into_iter()
        .filter_map(|id| TokenText::from_token(old_tok, id).map(|t| (id, t)))
        .collect()
}

/// Local (compositional) weights.
///
/// Sub-tokens come from re-encoding the new token with the old tokenizer;
/// those without an auxiliary vector are dropped. Each survivor scores
/// `c = (softmax(sim)_j + len_j / max(1, len_new)) / 2` and the final
/// weights are `softmax(c / temperature)`. `None` when the new token has no
/// auxiliary vector or no sub-token survives.
pub fn local_weights(
    new: &TokenText,
    old_tok: &BpeTokenizer,
    store: &AuxEmbeddingStore,
    temperature: f64,
    length_unit: LengthUnit,
) -> Option<WeightedRows> {
    let q = store.embed(&new.text)?;
    let mut ids = Vec::new();
    let mut sims = Vec::new();
    let mut lens = Vec::new();
    for (id, sub) in decompose(new, old_tok) {
        let Some(v) = store.embed(&sub.text) else {
            continue;
        };
        ids.push(id);
        sims.push(math::dot(&q, &v));
        lens.push(sub.len(length_unit));
    }
    if ids.is_empty() {
        return None;
    }
    let new_len = new.len(length_unit).max(1) as f64;
    let semantic = softmax(&sims);
    let combined: Vec<f64> =
        semantic.iter().zip(&lens).map(|(s, &l)| (s + l as f64 / new_len) / 2.0).collect();
    Some(WeightedRows { ids, weights: softmax_with_temperature(&combined, temperature) })
}

pub fn local_estimate(
    new: &TokenText,
    old_tok: &BpeTokenizer,
    e_old: &EmbeddingMatrix,
    store: &AuxEmbeddingStore,
    temperature: f64,
    length_unit: LengthUnit,
) -> Option<Estimate> {
    let weights = local_weights(new, old_tok, store, temperature, length_unit)?;
    Some(Estimate { vector: weights.apply(e_old), weights })
}

/// Global (neighborhood) weights: `softmax(sim / temperature)` over the
/// `k` nearest indexed old tokens. With a threshold, neighbors below it are
/// removed before the softmax; a threshold of -1 or lower removes nothing.
pub fn global_weights(
    new: &TokenText,
    index: &KnnIndex,
    store: &AuxEmbeddingStore,
    k: usize,
    temperature: f64,
    threshold: Option<f64>,
) -> Result<Option<WeightedRows>, AuxError> {
    let Some(q) = store.embed(&new.text) else {
        return Ok(None);
    };
    let mut neighbors = index.query(&q, k)?;
    if let Some(t) = threshold.filter(|t| *t > -1.0) {
        neighbors.retain(|n| n.similarity >= t);
    }
    if neighbors.is_empty() {
        return Ok(None);
    }
    let sims: Vec<f64> = neighbors.iter().map(|n| n.similarity).collect();
    Ok(Some(WeightedRows {
        ids: neighbors.iter().map(|n| n.id).collect(),
        weights: softmax_with_temperature(&sims, temperature),
    }))
}

pub fn global_estimate(
    new: &TokenText,
    index: &KnnIndex,
    e_old: &EmbeddingMatrix,
    store: &AuxEmbeddingStore,
    k: usize,
    temperature: f64,
    threshold: Option<f64>,
) -> Result<Option<Estimate>, AuxError> {
    Ok(global_weights(new, index, store, k, temperature, threshold)?
        .map(|weights| Estimate { vector: weights.apply(e_old), weights }))
}

/// Which branch produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Shared,
    Mapped,
    Hybrid,
    LocalOnly,
    GlobalOnly,
    RandomFallback,
    Retok,
    Mean,
    Random,
}

/// Column moments of the old matrix; random rows are drawn per column
/// from a Gaussian with these moments.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFallback {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl RandomFallback {
    pub fn from_matrix(m: &EmbeddingMatrix) -> Self {
        Self { mean: m.column_mean(), std: m.column_std() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f32> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                (m + s * z) as f32
            })
            .collect()
    }
}

/// Blends the two estimates with weight `global_weight` on the global one,
/// falling back to whichever is present, or to a random row.
pub fn hybrid_combine<R: Rng + ?Sized>(
    local: Option<&[f32]>,
    global: Option<&[f32]>,
    global_weight: f64,
    fallback: &RandomFallback,
    rng: &mut R,
) -> (Vec<f32>, Provenance) {
    match (local, global) {
        (Some(l), Some(g)) => {
            let v = if global_weight == 0.0 {
                l.to_vec()
            } else if global_weight == 1.0 {
                g.to_vec()
            } else {
                l.iter()
                    .zip(g)
                    .map(|(&a, &b)| {
                        ((1.0 - global_weight) * f64::from(a) + global_weight * f64::from(b)) as f32
                    })
                    .collect()
            };
            (v, Provenance::Hybrid)
        }
        (Some(l), None) => (l.to_vec(), Provenance::LocalOnly),
        (None, Some(g)) => (g.to_vec(), Provenance::GlobalOnly),
        (None, None) => (fallback.sample(rng), Provenance::RandomFallback),
    }
}
