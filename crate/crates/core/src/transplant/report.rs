use serde::{Deserialize, Serialize};

use crate::auxiliary::IndexReport;
use crate::bpe::BpeTokenizer;
use crate::vocab::TokenId;

use super::heuristics::Provenance;
use super::{Method, TransplantOptions};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceCounts {
    pub shared: usize,
    pub mapped: usize,
    pub hybrid: usize,
    pub local_only: usize,
    pub global_only: usize,
    pub random_fallback: usize,
    pub retok: usize,
    pub mean: usize,
    pub random: usize,
}

impl ProvenanceCounts {
    fn add(&mut self, p: Provenance) {
        let slot = match p {
            Provenance::Shared => &mut self.shared,
            Provenance::Mapped => &mut self.mapped,
            Provenance::Hybrid => &mut self.hybrid,
            Provenance::LocalOnly => &mut self.local_only,
            Provenance::GlobalOnly => &mut self.global_only,
            Provenance::RandomFallback => &mut self.random_fallback,
            Provenance::Retok => &mut self.retok,
            Provenance::Mean => &mut self.mean,
            Provenance::Random => &mut self.random,
        };
        *slot += 1;
    }

    pub fn total(&self) -> usize {
        self.shared + self.mapped + self.unique()
    }

    /// Tokens initialized by a method rather than copied.
    pub fn unique(&self) -> usize {
        self.hybrid
            + self.local_only
            + self.global_only
            + self.random_fallback
            + self.retok
            + self.mean
            + self.random
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenProvenance {
    pub id: TokenId,
    pub token: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransplantReport {
    pub method: Method,
    pub options: TransplantOptions,
    pub tied: bool,
    pub old_tokens_indexed: Option<usize>,
    pub old_tokens_without_aux: Option<usize>,
    pub counts: ProvenanceCounts,
    /// One entry per new token, in id order.
    pub tokens: Vec<TokenProvenance>,
}

impl TransplantReport {
    pub(super) fn new(
        opts: &TransplantOptions,
        new_tok: &BpeTokenizer,
        provenance: &[Provenance],
        index: Option<IndexReport>,
        tied: bool,
    ) -> Self {
        let mut counts = ProvenanceCounts::default();
        let tokens = new_tok
            .vocab()
            .iter()
            .zip(provenance)
            .map(|((id, tok), &p)| {
                counts.add(p);
                TokenProvenance { id, token: tok.to_owned(), provenance: p }
            })
            .collect();
        Self {
            method: opts.method,
            options: opts.clone(),
            tied,
            old_tokens_indexed: index.as_ref().map(|r| r.covered),
            old_tokens_without_aux: index.as_ref().map(|r| r.missing),
            counts,
            tokens,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
