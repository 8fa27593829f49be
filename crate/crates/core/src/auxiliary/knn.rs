use std::cmp::Ordering;

use crate::bpe::BpeTokenizer;
use crate::math;
use crate::vocab::TokenId;

use super::{AuxEmbeddingStore, AuxError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: TokenId,
    pub similarity: f64,
}

/// Descending similarity, ascending id on ties.
fn rank(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity.total_cmp(&a.similarity).then_with(|| a.id.cmp(&b.id))
}

/// Exact cosine index over unit vectors.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    keys: Vec<TokenId>,
    dim: usize,
    matrix: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexReport {
    pub covered: usize,
    pub missing: usize,
}

impl KnnIndex {
    /// Rows must already be unit length.
    pub fn from_rows(dim: usize, rows: Vec<(TokenId, Vec<f32>)>) -> Result<Self, AuxError> {
        if rows.is_empty() {
            return Err(AuxError::EmptyIndex);
        }
        let mut keys = Vec::with_capacity(rows.len());
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        for (id, row) in rows {
            if row.len() != dim {
                return Err(AuxError::DimMismatch { expected: dim, found: row.len() });
            }
            keys.push(id);
            matrix.extend_from_slice(&row);
        }
        Ok(Self { keys, dim, matrix })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn keys(&self) -> &[TokenId] {
        &self.keys
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    /// Up to `k` nearest rows by cosine similarity, brute force.
    pub fn query(&self, q: &[f32], k: usize) -> Result<Vec<Neighbor>, AuxError> {
        if k == 0 {
            return Err(AuxError::ZeroK);
        }
        if q.len() != self.dim {
            return Err(AuxError::QueryDim { expected: self.dim, found: q.len() });
        }
        let norm = math::l2_norm(q);
        if (norm - 1.0).abs() > 1e-4 {
            return Err(AuxError::QueryNotUnit(norm));
        }

        let mut scored: Vec<Neighbor> = self
            .keys
            .iter()
            .enumerate()
            .map(|(i, &id)| Neighbor { id, similarity: math::dot(q, self.row(i)) })
            .collect();
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_by(rank);
        Ok(scored)
    }
}

/// Indexes every old-vocabulary token whose decoded text has a stored
/// vector. Tokens without one are skipped and counted.
pub fn build_index(
    store: &AuxEmbeddingStore,
    old_tok: &BpeTokenizer,
) -> Result<(KnnIndex, IndexReport), AuxError> {
    let mut rows = Vec::new();
    let mut report = IndexReport::default();
    for (id, _) in old_tok.vocab().iter() {
        let text = old_tok.token_text(id).expect("id from own vocab");
        match store.get(&text) {
            Some(v) => {
                rows.push((id, v.to_vec()));
                report.covered += 1;
            }
            None => report.missing += 1,
        }
    }
    if report.missing > 0 {
        log::info!(
            "auxiliary index covers {} of {} old tokens",
            report.covered,
            report.covered + report.missing
        );
    }
    Ok((KnnIndex::from_rows(store.dim(), rows)?, report))
}
