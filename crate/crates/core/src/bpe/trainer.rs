use std::collections::{BTreeMap, HashMap, HashSet};

use super::byte_level;
use super::pretokenize::{split_words, PreTokenizer};
use super::{BpeTokenizer, TokenizerError};

/// Pre-tokenized training pieces with their occurrence counts. Ordered so
/// that training is independent of hash iteration order.
pub type PieceCounts = BTreeMap<String, u64>;

/// Trains a word-bounded byte-level BPE tokenizer.
///
/// Texts are split with [`split_words`] and the most frequent adjacent pair
/// is merged first. Equal counts are broken by the lexicographically
/// smallest `(left, right)` token strings.
pub fn train_bpe<I, S>(
    corpus: I,
    vocab_size: usize,
    specials: &[String],
) -> Result<BpeTokenizer, TokenizerError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts = PieceCounts::new();
    for text in corpus {
        for piece in split_words(text.as_ref()) {
            *counts.entry(piece.to_owned()).or_default() += 1;
        }
    }
    train_from_pieces(&counts, vocab_size, specials, PreTokenizer::Whitespace)
}

struct Word {
    symbols: Vec<u32>,
    count: i64,
}

impl Word {
    fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.symbols.windows(2).map(|w| (w[0], w[1]))
    }

    /// Replaces non-overlapping occurrences of `pair`, scanning left to right.
    fn merge(&mut self, pair: (u32, u32), merged: u32) {
        let mut out = Vec::with_capacity(self.symbols.len());
        let mut i = 0;
        while i < self.symbols.len() {
            if i + 1 < self.symbols.len() && (self.symbols[i], self.symbols[i + 1]) == pair {
                out.push(merged);
                i += 2;
            } else {
                out.push(self.symbols[i]);
                i += 1;
            }
        }
        self.symbols = out;
    }
}

/// Core trainer over already pre-tokenized pieces. `pre_tokenizer` is
/// stored on the resulting tokenizer and used at encode time.
pub fn train_from_pieces(
    pieces: &PieceCounts,
    vocab_size: usize,
    specials: &[String],
    pre_tokenizer: PreTokenizer,
) -> Result<BpeTokenizer, TokenizerError> {
    let minimum = 256 + specials.len();
    if vocab_size < minimum {
        return Err(TokenizerError::VocabTooSmall { requested: vocab_size, minimum });
    }
    if pieces.iter().all(|(p, &c)| p.is_empty() || c == 0) {
        return Err(TokenizerError::EmptyCorpus);
    }

    let mut strings: Vec<String> = specials.to_vec();
    let byte_base = strings.len() as u32;
    strings.extend((0..=255u8).map(|b| byte_level::byte_to_char(b).to_string()));

    let mut words: Vec<Word> = pieces
        .iter()
        .filter(|(p, &c)| !p.is_empty() && c > 0)
        .map(|(p, &c)| Word {
            symbols: p.bytes().map(|b| byte_base + u32::from(b)).collect(),
            count: c as i64,
        })
        .collect();

    let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, word) in words.iter().enumerate() {
        for pair in word.pairs() {
            *pair_counts.entry(pair).or_default() += word.count;
            pair_words.entry(pair).or_default().insert(wi);
        }
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    while strings.len() < vocab_size {
        let best = pair_counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    let ka = (&strings[pa.0 as usize], &strings[pa.1 as usize]);
                    let kb = (&strings[pb.0 as usize], &strings[pb.1 as usize]);
                    kb.cmp(&ka)
                })
            })
            .map(|(&p, _)| p);
        let Some(pair) = best else { break };

        let merged_str = format!("{}{}", strings[pair.0 as usize], strings[pair.1 as usize]);
        let merged = strings.len() as u32;
        merges.push((strings[pair.0 as usize].clone(), strings[pair.1 as usize].clone()));
        strings.push(merged_str);

        let mut affected: Vec<usize> =
            pair_words.remove(&pair).map(|s| s.into_iter().collect()).unwrap_or_default();
        affected.sort_unstable();
        for wi in affected {
            let word = &mut words[wi];
            for p in word.pairs() {
                *pair_counts.get_mut(&p).unwrap() -= word.count;
            }
            word.merge(pair, merged);
            for p in word.pairs() {
                *pair_counts.entry(p).or_default() += word.count;
                pair_words.entry(p).or_default().insert(wi);
            }
        }
        pair_counts.retain(|_, c| *c > 0);
    }

    log::debug!("trained {} merges, vocab size {}", merges.len(), strings.len());
    BpeTokenizer::from_parts(strings, merges, specials.to_vec(), pre_tokenizer)
}
