//! Supertoken training: BPE over stochastically chunked documents.
//!
//! Each document is cut into runs of whole words whose lengths are drawn
//! from a [`ChunkLengthDistribution`], and a separator is inserted between
//! runs. The trainer splits on the separator before counting pairs, so
//! merges may cross whitespace inside a run but never a run boundary.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpe::{split_words, train_from_pieces, BpeTokenizer, PieceCounts, PreTokenizer, TokenizerError};

/// Private-use codepoint, never expected in real text.
pub const DEFAULT_SEPARATOR: &str = "\u{E000}";

#[derive(Debug, Error)]
pub enum SupertokenError {
    #[error("chunk length distribution is empty")]
    EmptyDistribution,
    #[error("chunk length distribution: {0}")]
    InvalidDistribution(String),
    #[error("separator must be non-empty")]
    EmptySeparator,
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkLengthDistribution {
    support: Vec<usize>,
    probs: Vec<f64>,
}

impl ChunkLengthDistribution {
    pub fn new(entries: &[(usize, f64)]) -> Result<Self, SupertokenError> {
        if entries.is_empty() {
            return Err(SupertokenError::EmptyDistribution);
        }
        let invalid = |m: String| Err(SupertokenError::InvalidDistribution(m));
        let mut support: Vec<usize> = Vec::with_capacity(entries.len());
        for &(len, p) in entries {
            if len == 0 {
                return invalid("chunk lengths must be positive".into());
            }
            if !(p >= 0.0 && p.is_finite()) {
                return invalid(format!("probability {p} for length {len}"));
            }
            if support.contains(&len) {
                return invalid(format!("length {len} listed twice"));
            }
            support.push(len);
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("probabilities sum to {total}, expected 1"));
        }
        Ok(Self { support, probs: entries.iter().map(|e| e.1).collect() })
    }

    /// A single chunk length with probability one.
    pub fn fixed(len: usize) -> Result<Self, SupertokenError> {
        Self::new(&[(len, 1.0)])
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (&len, &p) in self.support.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return len;
            }
        }
        // rounding left u above the cumulative total; take the last length with mass
        self.support
            .iter()
            .zip(&self.probs)
            .rev()
            .find(|(_, &p)| p > 0.0)
            .map(|(&l, _)| l)
            .unwrap_or(self.support[self.support.len() - 1])
    }
}

impl Default for ChunkLengthDistribution {
    fn default() -> Self {
        Self::new(&[(1, 0.40), (2, 0.30), (3, 0.20), (4, 0.10)]).expect("valid default")
    }
}

/// Parses `"1:0.4,2:0.3,3:0.2,4:0.1"`.
impl FromStr for ChunkLengthDistribution {
    type Err = SupertokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (len, p) = part.split_once(':').ok_or_else(|| {
                SupertokenError::InvalidDistribution(format!("expected len:prob, got {part:?}"))
            })?;
            let len = len
                .trim()
                .parse::<usize>()
                .map_err(|e| SupertokenError::InvalidDistribution(format!("length {len:?}: {e}")))?;
            let p = p
                .trim()
                .parse::<f64>()
                .map_err(|e| SupertokenError::InvalidDistribution(format!("probability {p:?}: {e}")))?;
            entries.push((len, p));
        }
        Self::new(&entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkUnit {
    /// Whitespace-delimited words, leading whitespace attached.
    #[default]
    Words,
    /// Unicode scalar values.
    Chars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupertokenConfig {
    pub dist: ChunkLengthDistribution,
    pub separator: String,
    pub vocab_size: usize,
    pub specials: Vec<String>,
    pub seed: u64,
    pub unit: ChunkUnit,
}

impl SupertokenConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            dist: ChunkLengthDistribution::default(),
            separator: DEFAULT_SEPARATOR.to_string(),
            vocab_size,
            specials: Vec::new(),
            seed: 0,
            unit: ChunkUnit::Words,
        }
    }
}

/// Chunk lengths summing to `unit_count`. Every length is an independent
/// draw except the last, which is clamped to what remains.
pub fn generate_chunk_lengths<R: Rng + ?Sized>(
    unit_count: usize,
    dist: &ChunkLengthDistribution,
    rng: &mut R,
) -> Vec<usize> {
    let mut lengths = Vec::new();
    let mut remaining = unit_count;
    while remaining > 0 {
        let len = dist.sample(rng).min(remaining);
        lengths.push(len);
        remaining -= len;
    }
    lengths
}

/// RNG for document `doc_index`, independent of processing order.
pub fn document_rng(seed: u64, doc_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(doc_index);
    rng
}

/// Rewrites `text` as its chunks joined by the separator. Occurrences of
/// the separator already in `text` are removed first.
pub fn augment_document<R: Rng + ?Sized>(text: &str, cfg: &SupertokenConfig, rng: &mut R) -> String {
    let cleaned;
    let text = if text.contains(cfg.separator.as_str()) {
        cleaned = text.replace(cfg.separator.as_str(), "");
        cleaned.as_str()
    } else {
        text
    };

    let units: Vec<&str> = match cfg.unit {
        ChunkUnit::Words => split_words(text),
        ChunkUnit::Chars => text.char_indices().map(|(i, c)| &text[i..i + c.len_utf8()]).collect(),
    };
    let lengths = generate_chunk_lengths(units.len(), &cfg.dist, rng);

    let mut out = String::with_capacity(text.len() + lengths.len() * cfg.separator.len());
    let mut pos = 0;
    for (i, len) in lengths.iter().enumerate() {
        if i > 0 {
            out.push_str(&cfg.separator);
        }
        for unit in &units[pos..pos + len] {
            out.push_str(unit);
        }
        pos += len;
    }
    out
}

/// Trains a BPE tokenizer over augmented documents. The returned tokenizer
/// uses chunked pre-tokenization on the same separator, so at encode time
/// an ordinary document is one merge span.
pub fn train_supertokenizer<I, S>(corpus: I, cfg: &SupertokenConfig) -> Result<BpeTokenizer, SupertokenError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str> + Send + Sync,
{
    if cfg.separator.is_empty() {
        return Err(SupertokenError::EmptySeparator);
    }
    let docs: Vec<S> = corpus.into_iter().collect();
    let augmented: Vec<String> = docs
        .par_iter()
        .enumerate()
        .map(|(i, doc)| augment_document(doc.as_ref(), cfg, &mut document_rng(cfg.seed, i as u64)))
        .collect();

    let mut counts = PieceCounts::new();
    for doc in &augmented {
        for chunk in doc.split(cfg.separator.as_str()).filter(|c| !c.is_empty()) {
            *counts.entry(chunk.to_owned()).or_default() += 1;
        }
    }
    let pre = PreTokenizer::Chunked { separator: cfg.separator.clone() };
    Ok(train_from_pieces(&counts, cfg.vocab_size, &cfg.specials, pre)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::train_bpe;
    use std::collections::BTreeSet;

    fn cfg(dist: ChunkLengthDistribution, sep: &str) -> SupertokenConfig {
        SupertokenConfig { dist, separator: sep.into(), ..SupertokenConfig::new(400) }
    }

    #[test]
    fn degenerate_distribution_gives_single_chunk() {
        let d = ChunkLengthDistribution::fixed(5).unwrap();
        assert_eq!(generate_chunk_lengths(5, &d, &mut document_rng(1, 0)), vec![5]);
    }

    #[test]
    fn single_word_is_clamped() {
        let d = ChunkLengthDistribution::default();
        for seed in 0..20 {
            assert_eq!(generate_chunk_lengths(1, &d, &mut document_rng(seed, 0)), vec![1]);
        }
    }

    #[test]
    fn last_chunk_is_clamped_to_remainder() {
        let d = ChunkLengthDistribution::fixed(2).unwrap();
        assert_eq!(generate_chunk_lengths(7, &d, &mut document_rng(0, 0)), vec![2, 2, 2, 1]);
    }

    #[test]
    fn lengths_always_sum_to_count() {
        let d = ChunkLengthDistribution::default();
        for n in 1..60 {
            let l = generate_chunk_lengths(n, &d, &mut document_rng(7, n as u64));
            assert_eq!(l.iter().sum::<usize>(), n);
            assert!(l[..l.len() - 1].iter().all(|x| (1..=4).contains(x)));
        }
    }

    #[test]
    fn augmentation_examples() {
        let c3 = cfg(ChunkLengthDistribution::fixed(3).unwrap(), "§");
        assert_eq!(augment_document("a b c", &c3, &mut document_rng(0, 0)), "a b c");
        let c2 = cfg(ChunkLengthDistribution::fixed(2).unwrap(), "§");
        assert_eq!(augment_document("a b c d", &c2, &mut document_rng(0, 0)), "a b§ c d");
        assert_eq!(augment_document("", &c2, &mut document_rng(0, 0)), "");
    }

    #[test]
    fn existing_separators_are_stripped() {
        let c = cfg(ChunkLengthDistribution::fixed(1).unwrap(), "§");
        assert_eq!(augment_document("x§y z", &c, &mut document_rng(0, 0)), "xy§ z");
    }

    #[test]
    fn removing_separator_restores_text() {
        let c = cfg(ChunkLengthDistribution::default(), DEFAULT_SEPARATOR);
        let text = "  the quick  brown fox\tjumps over the lazy dog ";
        for i in 0..10 {
            let aug = augment_document(text, &c, &mut document_rng(3, i));
            assert_eq!(aug.replace(DEFAULT_SEPARATOR, ""), text);
        }
    }

    #[test]
    fn char_mode_chunks_characters() {
        let c = SupertokenConfig {
            unit: ChunkUnit::Chars,
            ..cfg(ChunkLengthDistribution::fixed(2).unwrap(), "|")
        };
        assert_eq!(augment_document("héllo", &c, &mut document_rng(0, 0)), "hé|ll|o");
    }

    #[test]
    fn parse_distribution() {
        let d: ChunkLengthDistribution = "1:0.4,2:0.3,3:0.2,4:0.1".parse().unwrap();
        assert_eq!(d, ChunkLengthDistribution::default());
        assert!(matches!("".parse::<ChunkLengthDistribution>(), Err(SupertokenError::EmptyDistribution)));
        assert!("1:0.5".parse::<ChunkLengthDistribution>().is_err());
        assert!("1:0.5,1:0.5".parse::<ChunkLengthDistribution>().is_err());
        assert!("0:1".parse::<ChunkLengthDistribution>().is_err());
    }

    fn decoded_vocab(tok: &BpeTokenizer) -> Vec<String> {
        tok.vocab().iter().map(|(id, _)| tok.token_text(id).unwrap()).collect()
    }

    #[test]
    fn learns_multi_word_tokens() {
        let corpus = vec!["the cat sat"; 500];
        let c = cfg(ChunkLengthDistribution::fixed(3).unwrap(), DEFAULT_SEPARATOR);
        let tok = train_supertokenizer(&corpus, &c).unwrap();
        let vocab = decoded_vocab(&tok);
        assert!(vocab.iter().any(|t| t.trim().contains(' ')));
        assert!(vocab.iter().all(|t| !t.contains(DEFAULT_SEPARATOR)));
    }

    #[test]
    fn one_word_chunks_match_word_bounded_bpe() {
        let corpus = ["the cat sat on the mat", "a dog sat on a log", "the cat and the dog"];
        let corpus: Vec<&str> = corpus.iter().cycle().take(60).copied().collect();
        let c = SupertokenConfig {
            dist: ChunkLengthDistribution::fixed(1).unwrap(),
            seed: 11,
            ..SupertokenConfig::new(330)
        };
        let st = train_supertokenizer(&corpus, &c).unwrap();
        let plain = train_bpe(&corpus, 330, &[]).unwrap();
        let a: BTreeSet<_> = st.vocab().entries().iter().collect();
        let b: BTreeSet<_> = plain.vocab().entries().iter().collect();
        assert_eq!(a, b);
        for t in decoded_vocab(&st) {
            assert!(t.split_whitespace().count() <= 1, "{t:?}");
        }
    }

    #[test]
    fn empty_separator_is_rejected() {
        let c = cfg(ChunkLengthDistribution::default(), "");
        assert!(matches!(train_supertokenizer(["a b"], &c), Err(SupertokenError::EmptySeparator)));
    }
}
