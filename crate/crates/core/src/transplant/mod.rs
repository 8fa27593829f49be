//! Embedding initialization for a replacement tokenizer.
//!
//! Shared tokens keep their old rows bit for bit. Every other new token is
//! initialized by the selected [`Method`]; for [`Method::TokenAdapt`] that is
//! a blend of a compositional estimate over the token's old-tokenizer pieces
//! and a neighborhood estimate from the auxiliary kNN index.

mod baselines;
mod heuristics;
mod matrix;
mod report;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auxiliary::{build_index, AuxEmbeddingStore, AuxError, IndexReport, KnnIndex};
use crate::bpe::BpeTokenizer;
use crate::config::{ConfigError, HeuristicConfig};
use crate::vocab::{partition_vocab, TokenId};

pub use baselines::{mean_init, random_init, retok_init, retok_weights};
pub use heuristics::{
    global_estimate, global_weights, hybrid_combine, local_estimate, local_weights, Estimate, Provenance,
    RandomFallback, TokenText, WeightedRows,
};
pub use matrix::{EmbeddingMatrix, MatrixError, MatrixRole};
pub use report::{ProvenanceCounts, TokenProvenance, TransplantReport};

#[derive(Debug, Error)]
pub enum TransplantError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{role:?} embedding has {found} rows but the old vocabulary has {expected} tokens")]
    RowCount { role: MatrixRole, expected: usize, found: usize },
    #[error("input dimension {input} differs from output dimension {output}")]
    DimMismatch { input: usize, output: usize },
    #[error("an auxiliary embedding store is required when the new vocabulary has unique tokens")]
    MissingStore,
    #[error("special mapping {new:?} -> {old:?}: {reason}")]
    SpecialMapping { new: String, old: String, reason: String },
    #[error(transparent)]
    Aux(#[from] AuxError),
}

/// Input embeddings plus the output projection when it is not tied.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEmbeddings {
    pub input: EmbeddingMatrix,
    pub output: Option<EmbeddingMatrix>,
}

impl ModelEmbeddings {
    pub fn tied(input: EmbeddingMatrix) -> Self {
        Self { input: input.with_role(MatrixRole::Input), output: None }
    }

    pub fn untied(input: EmbeddingMatrix, output: EmbeddingMatrix) -> Result<Self, TransplantError> {
        if input.dim() != output.dim() {
            return Err(TransplantError::DimMismatch { input: input.dim(), output: output.dim() });
        }
        Ok(Self {
            input: input.with_role(MatrixRole::Input),
            output: Some(output.with_role(MatrixRole::Output)),
        })
    }

    pub fn is_tied(&self) -> bool {
        self.output.is_none()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &EmbeddingMatrix> {
        std::iter::once(&self.input).chain(self.output.as_ref())
    }
}

/// Initialization for tokens that are not shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    TokenAdapt,
    Retok,
    Mean,
    Random,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tokenadapt" => Ok(Method::TokenAdapt),
            "retok" => Ok(Method::Retok),
            "mean" => Ok(Method::Mean),
            "random" => Ok(Method::Random),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TokenAdapt => "tokenadapt",
            Method::Retok => "retok",
            Method::Mean => "mean",
            Method::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransplantOptions {
    pub method: Method,
    pub heuristic: HeuristicConfig,
    /// Explicit `(new special, old token)` row copies.
    #[serde(default)]
    pub special_map: Vec<(String, String)>,
}

/// What to do for one new token; independent of which matrix is filled.
#[derive(Debug, Clone)]
enum Plan {
    Copy(TokenId, Provenance),
    Blend { local: Option<WeightedRows>, global: Option<WeightedRows> },
    Weighted(WeightedRows, Provenance),
    Mean,
    Random(Provenance),
}

impl Plan {
    fn provenance(&self) -> Provenance {
        match self {
            Plan::Copy(_, p) | Plan::Weighted(_, p) | Plan::Random(p) => *p,
            Plan::Mean => Provenance::Mean,
            Plan::Blend { local, global } => match (local, global) {
                (Some(_), Some(_)) => Provenance::Hybrid,
                (Some(_), None) => Provenance::LocalOnly,
                (None, Some(_)) => Provenance::GlobalOnly,
                (None, None) => Provenance::RandomFallback,
            },
        }
    }
}

/// Per-token RNG so that random rows do not depend on scheduling.
fn token_rng(seed: u64, id: TokenId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(id.0));
    rng
}

fn fill_matrix(
    plans: &[Plan],
    e_old: &EmbeddingMatrix,
    role: MatrixRole,
    cfg: &HeuristicConfig,
) -> EmbeddingMatrix {
    let fallback = RandomFallback::from_matrix(e_old);
    let mean = mean_init(e_old);
    let dim = e_old.dim();
    let rows: Vec<Vec<f32>> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let id = TokenId::from(i);
            match plan {
                Plan::Copy(old, _) => e_old.row(old.index()).to_vec(),
                Plan::Weighted(w, _) => w.apply(e_old),
                Plan::Mean => mean.clone(),
                Plan::Random(_) => fallback.sample(&mut token_rng(cfg.seed, id)),
                Plan::Blend { local, global } => {
                    let l = local.as_ref().map(|w| w.apply(e_old));
                    let g = global.as_ref().map(|w| w.apply(e_old));
                    hybrid_combine(
                        l.as_deref(),
                        g.as_deref(),
                        cfg.global_weight,
                        &fallback,
                        &mut token_rng(cfg.seed, id),
                    )
                    .0
                }
            }
        })
        .collect();
    let mut data = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        data.extend_from_slice(&r);
    }
    EmbeddingMatrix::from_parts_unchecked(plans.len(), dim, data, role)
}

/// Builds embeddings for `new_tok` from a model trained with `old_tok`.
///
/// Untied models get both matrices filled from the same per-token weights.
/// Output is identical for any rayon thread count.
pub fn transplant(
    model: &ModelEmbeddings,
    old_tok: &BpeTokenizer,
    new_tok: &BpeTokenizer,
    store: Option<&AuxEmbeddingStore>,
    opts: &TransplantOptions,
) -> Result<(ModelEmbeddings, TransplantReport), TransplantError> {
    let cfg = &opts.heuristic;
    cfg.validate()?;
    for m in model.matrices() {
        if m.rows() != old_tok.vocab_size() {
            return Err(TransplantError::RowCount {
                role: m.role(),
                expected: old_tok.vocab_size(),
                found: m.rows(),
            });
        }
    }
    if let Some(out) = &model.output {
        if out.dim() != model.input.dim() {
            return Err(TransplantError::DimMismatch { input: model.input.dim(), output: out.dim() });
        }
    }

    let old_vocab = old_tok.vocab();
    let new_vocab = new_tok.vocab();
    let partition = partition_vocab(old_vocab, new_vocab);

    let mut mapped: HashMap<&str, TokenId> = HashMap::new();
    for (new, old) in &opts.special_map {
        let err = |reason: &str| TransplantError::SpecialMapping {
            new: new.clone(),
            old: old.clone(),
            reason: reason.into(),
        };
        if !new_vocab.is_special(new) {
            return Err(err("not a special token of the new tokenizer"));
        }
        let old_id = old_vocab.id_of(old).ok_or_else(|| err("not in the old vocabulary"))?;
        mapped.insert(new.as_str(), old_id);
    }

    let needs_aux = opts.method == Method::TokenAdapt
        && partition.unique.iter().any(|t| !mapped.contains_key(t.as_str()));
    let aux = if needs_aux {
        let store = store.ok_or(TransplantError::MissingStore)?;
        let (index, report) = build_index(store, old_tok)?;
        Some((store, index, report))
    } else {
        None
    };

    let plans: Vec<Plan> = new_vocab
        .entries()
        .par_iter()
        .enumerate()
        .map(|(i, tok)| plan_token(TokenId::from(i), tok, old_tok, new_tok, &mapped, aux.as_ref(), opts))
        .collect::<Result<_, _>>()?;

    let input = fill_matrix(&plans, &model.input, MatrixRole::Input, cfg);
    let output = model.output.as_ref().map(|m| fill_matrix(&plans, m, MatrixRole::Output, cfg));

    let provenance: Vec<Provenance> = plans.iter().map(Plan::provenance).collect();
    let report = TransplantReport::new(
        opts,
        new_tok,
        &provenance,
        aux.as_ref().map(|(_, _, r)| r.clone()),
        model.is_tied(),
    );
    Ok((ModelEmbeddings { input, output }, report))
}

fn plan_token(
    id: TokenId,
    tok: &str,
    old_tok: &BpeTokenizer,
    new_tok: &BpeTokenizer,
    mapped: &HashMap<&str, TokenId>,
    aux: Option<&(&AuxEmbeddingStore, KnnIndex, IndexReport)>,
    opts: &TransplantOptions,
) -> Result<Plan, TransplantError> {
    if let Some(old) = old_tok.vocab().id_of(tok) {
        return Ok(Plan::Copy(old, Provenance::Shared));
    }
    if let Some(&old) = mapped.get(tok) {
        return Ok(Plan::Copy(old, Provenance::Mapped));
    }
    let text = TokenText::from_token(new_tok, id).expect("id from own vocab");
    let cfg = &opts.heuristic;
    Ok(match opts.method {
        Method::TokenAdapt => {
            let (store, index, _) = aux.expect("index built for unique tokens");
            let local = local_weights(&text, old_tok, store, cfg.temperature, cfg.length_unit);
            let global = global_weights(
                &text,
                index,
                store,
                cfg.k_neighbors,
                cfg.temperature,
                cfg.similarity_threshold,
            )?;
            Plan::Blend { local, global }
        }
        Method::Retok => match retok_weights(&text, old_tok) {
            Some(w) => Plan::Weighted(w, Provenance::Retok),
            None => Plan::Random(Provenance::RandomFallback),
        },
        Method::Mean => Plan::Mean,
        Method::Random => Plan::Random(Provenance::Random),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auxiliary::PseudoEmbedder;
    use crate::bpe::train_bpe;

    fn setup() -> (BpeTokenizer, BpeTokenizer, ModelEmbeddings, AuxEmbeddingStore) {
        let corpus = ["the cat sat on the mat", "the dog ate the cat food"];
        let old = train_bpe(corpus.iter().cycle().take(20), 270, &[]).unwrap();
        let new = train_bpe(corpus.iter().cycle().take(20), 290, &["<eos>".to_string()]).unwrap();
        let dim = 6;
        let data: Vec<f32> =
            (0..old.vocab_size() * dim).map(|i| ((i * 37 % 101) as f32 - 50.0) / 25.0).collect();
        let model = ModelEmbeddings::tied(
            EmbeddingMatrix::new(old.vocab_size(), dim, data, MatrixRole::Input).unwrap(),
        );
        let pseudo = PseudoEmbedder::new(8, 1);
        let mut store = AuxEmbeddingStore::new(8).unwrap();
        for t in old
            .vocab()
            .iter()
            .map(|(id, _)| old.token_text(id).unwrap())
            .chain(new.vocab().iter().map(|(id, _)| new.token_text(id).unwrap()))
        {
            store.insert(t.clone(), &pseudo.embed(&t)).unwrap();
        }
        (old, new, model, store)
    }

    #[test]
    fn identical_vocab_is_a_copy() {
        let (old, _, model, store) = setup();
        let (out, report) =
            transplant(&model, &old, &old, Some(&store), &TransplantOptions::default()).unwrap();
        assert_eq!(out, model);
        assert_eq!(report.counts.shared, old.vocab_size());
        assert_eq!(report.counts.unique(), 0);
    }

    #[test]
    fn counts_cover_vocab_and_shared_rows_are_exact() {
        let (old, new, model, store) = setup();
        for method in [Method::TokenAdapt, Method::Retok, Method::Mean, Method::Random] {
            let opts = TransplantOptions { method, ..Default::default() };
            let (out, report) = transplant(&model, &old, &new, Some(&store), &opts).unwrap();
            assert_eq!(out.input.rows(), new.vocab_size());
            assert_eq!(report.counts.total(), new.vocab_size());
            for (id, tok) in new.vocab().iter() {
                if let Some(o) = old.vocab().id_of(tok) {
                    assert_eq!(out.input.row(id.index()), model.input.row(o.index()));
                }
            }
        }
    }

    #[test]
    fn missing_store_and_bad_shapes() {
        let (old, new, model, _) = setup();
        assert!(matches!(
            transplant(&model, &old, &new, None, &TransplantOptions::default()),
            Err(TransplantError::MissingStore)
        ));
        // baselines work without a store
        let opts = TransplantOptions { method: Method::Mean, ..Default::default() };
        transplant(&model, &old, &new, None, &opts).unwrap();

        let short =
            ModelEmbeddings::tied(EmbeddingMatrix::new(3, 2, vec![0.0; 6], MatrixRole::Input).unwrap());
        assert!(matches!(transplant(&short, &old, &new, None, &opts), Err(TransplantError::RowCount { .. })));
        let a = EmbeddingMatrix::new(2, 2, vec![0.0; 4], MatrixRole::Input).unwrap();
        let b = EmbeddingMatrix::new(2, 3, vec![0.0; 6], MatrixRole::Output).unwrap();
        assert!(matches!(ModelEmbeddings::untied(a, b), Err(TransplantError::DimMismatch { .. })));
    }

    #[test]
    fn special_mapping_copies_row() {
        let (old, new, model, store) = setup();
        let opts =
            TransplantOptions { special_map: vec![("<eos>".into(), "Ġ".into())], ..Default::default() };
        let (out, report) = transplant(&model, &old, &new, Some(&store), &opts).unwrap();
        let eos = new.vocab().id_of("<eos>").unwrap();
        let sp = old.vocab().id_of("Ġ").unwrap();
        assert_eq!(out.input.row(eos.index()), model.input.row(sp.index()));
        assert_eq!(report.counts.mapped, 1);

        let bad = TransplantOptions { special_map: vec![("Ġ".into(), "Ġ".into())], ..Default::default() };
        assert!(matches!(
            transplant(&model, &old, &new, Some(&store), &bad),
            Err(TransplantError::SpecialMapping { .. })
        ));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let (old, new, model, store) = setup();
        let opts = TransplantOptions::default();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| transplant(&model, &old, &new, Some(&store), &opts).unwrap())
        };
        let (a, ra) = run(1);
        let (b, rb) = run(4);
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }
}
