//! Byte-level BPE tokenizer.

pub mod byte_level;
mod file;
pub mod pretokenize;
mod trainer;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::vocab::{TokenId, VocabError, Vocabulary};

pub use file::{load_tokenizer, save_tokenizer, TOKENIZER_FORMAT_VERSION};
pub use pretokenize::{split_words, PreTokenizer};
pub use trainer::{train_bpe, train_from_pieces, PieceCounts};

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("corpus contains no non-empty text")]
    EmptyCorpus,
    #[error("vocab size {requested} is below the minimum {minimum} (256 bytes + specials)")]
    VocabTooSmall { requested: usize, minimum: usize },
    #[error("token id {0} is out of range")]
    UnknownId(TokenId),
    #[error("byte 0x{0:02x} has no token in this vocabulary")]
    UncoveredByte(u8),
    #[error("merge ({0:?}, {1:?}) refers to a token missing from the vocabulary")]
    InvalidMerge(String, String),
    #[error("duplicate merge ({0:?}, {1:?})")]
    DuplicateMerge(String, String),
    #[error("token {0:?} is not a byte-level string")]
    NotByteLevel(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("malformed tokenizer file at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported tokenizer file: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy)]
struct MergeEntry {
    rank: u32,
    merged: u32,
}

/// Immutable byte-level BPE tokenizer.
///
/// Non-special vocabulary entries are byte-level strings (see
/// [`byte_level`]); specials are stored verbatim and are matched in input
/// text before pre-tokenization.
#[derive(Debug, Clone)]
pub struct BpeTokenizer {
    vocab: Vocabulary,
    merges: Vec<(String, String)>,
    merge_table: HashMap<(u32, u32), MergeEntry>,
    byte_ids: [Option<u32>; 256],
    token_bytes: Vec<Vec<u8>>,
    /// Specials sorted longest first for matching.
    specials_by_len: Vec<(String, u32)>,
    pre_tokenizer: PreTokenizer,
}

impl BpeTokenizer {
    /// Assembles a tokenizer from its vocabulary (in id order), merges (in
    /// rank order) and special tokens.
    pub fn from_parts(
        entries: Vec<String>,
        merges: Vec<(String, String)>,
        specials: Vec<String>,
        pre_tokenizer: PreTokenizer,
    ) -> Result<Self, TokenizerError> {
        let vocab = Vocabulary::new(entries, &specials)?;

        let mut token_bytes = Vec::with_capacity(vocab.len());
        let mut byte_ids = [None; 256];
        for (id, tok) in vocab.iter() {
            if vocab.is_special(tok) {
                token_bytes.push(tok.as_bytes().to_vec());
                continue;
            }
            let bytes = byte_level::decode_str(tok)
                .filter(|b| !b.is_empty())
                .ok_or_else(|| TokenizerError::NotByteLevel(tok.to_owned()))?;
            if let [b] = bytes[..] {
                byte_ids[b as usize] = Some(id.0);
            }
            token_bytes.push(bytes);
        }

        let mut merge_table = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let invalid = || TokenizerError::InvalidMerge(l.clone(), r.clone());
            let lid = vocab.id_of(l).ok_or_else(invalid)?;
            let rid = vocab.id_of(r).ok_or_else(invalid)?;
            let merged = vocab.id_of(&format!("{l}{r}")).ok_or_else(invalid)?;
            if [lid, rid, merged].iter().any(|id| vocab.is_special(vocab.token(*id).unwrap())) {
                return Err(invalid());
            }
            let entry = MergeEntry { rank: rank as u32, merged: merged.0 };
            if merge_table.insert((lid.0, rid.0), entry).is_some() {
                return Err(TokenizerError::DuplicateMerge(l.clone(), r.clone()));
            }
        }

        let mut specials_by_len: Vec<(String, u32)> = vocab
            .specials()
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| (s.clone(), vocab.id_of(s).unwrap().0))
            .collect();
        specials_by_len.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        Ok(Self { vocab, merges, merge_table, byte_ids, token_bytes, specials_by_len, pre_tokenizer })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Merge rules in rank order.
    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn pre_tokenizer(&self) -> &PreTokenizer {
        &self.pre_tokenizer
    }

    /// True when every one of the 256 bytes has a token, so any text encodes.
    pub fn is_byte_complete(&self) -> bool {
        self.byte_ids.iter().all(Option::is_some)
    }

    /// Encodes `text`. Bytes with no single-byte token (only possible for
    /// hand-built partial vocabularies) are skipped; see [`Self::encode_checked`].
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        self.encode_into(text, &mut out, &mut |_| {});
        out
    }

    /// Like [`Self::encode`] but fails on the first byte that has no token.
    pub fn encode_checked(&self, text: &str) -> Result<Vec<TokenId>, TokenizerError> {
        let mut out = Vec::new();
        let mut missing = None;
        self.encode_into(text, &mut out, &mut |b| {
            missing.get_or_insert(b);
        });
        match missing {
            Some(b) => Err(TokenizerError::UncoveredByte(b)),
            None => Ok(out),
        }
    }

    /// Encodes raw bytes. Valid UTF-8 goes through [`Self::encode`]; other
    /// sequences (fragments of multi-byte characters) form a single piece.
    pub fn encode_bytes(&self, bytes: &[u8]) -> Vec<TokenId> {
        match std::str::from_utf8(bytes) {
            Ok(s) => self.encode(s),
            Err(_) => {
                let mut out = Vec::new();
                self.encode_piece(bytes, &mut out, &mut |_| {});
                out
            }
        }
    }

    /// Raw bytes of one token.
    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.token_bytes.get(id.index()).map(Vec::as_slice)
    }

    fn encode_into(&self, text: &str, out: &mut Vec<TokenId>, on_missing: &mut dyn FnMut(u8)) {
        let mut rest = text;
        while !rest.is_empty() {
            let (plain, special) = self.next_special(rest);
            for piece in self.pre_tokenizer.split(plain) {
                self.encode_piece(piece.as_bytes(), out, on_missing);
            }
            match special {
                Some((len, id)) => {
                    out.push(TokenId(id));
                    rest = &rest[plain.len() + len..];
                }
                None => break,
            }
        }
    }

    /// Text before the earliest special token, plus that token's length and id.
    fn next_special<'a>(&self, text: &'a str) -> (&'a str, Option<(usize, u32)>) {
        let mut best: Option<(usize, usize, u32)> = None;
        for (s, id) in &self.specials_by_len {
            if let Some(pos) = text.find(s.as_str()) {
                // longest wins at equal positions because of the sort order
                if best.is_none_or(|(p, _, _)| pos < p) {
                    best = Some((pos, s.len(), *id));
                }
            }
        }
        match best {
            Some((pos, len, id)) => (&text[..pos], Some((len, id))),
            None => (text, None),
        }
    }

    /// Applies merges lowest rank first; equal ranks resolve leftmost first.
    fn encode_piece(&self, bytes: &[u8], out: &mut Vec<TokenId>, on_missing: &mut dyn FnMut(u8)) {
        let mut ids: Vec<u32> = Vec::with_capacity(bytes.len());
        for &b in bytes {
            match self.byte_ids[b as usize] {
                Some(id) => ids.push(id),
                None => on_missing(b),
            }
        }
        if ids.len() < 2 || self.merge_table.is_empty() {
            out.extend(ids.into_iter().map(TokenId));
            return;
        }

        const NONE: usize = usize::MAX;
        let n = ids.len();
        let mut prev: Vec<usize> = (0..n).map(|i| if i == 0 { NONE } else { i - 1 }).collect();
        let mut next: Vec<usize> = (0..n).map(|i| if i + 1 == n { NONE } else { i + 1 }).collect();
        let mut alive = vec![true; n];

        let mut heap = BinaryHeap::new();
        for i in 0..n - 1 {
            if let Some(m) = self.merge_table.get(&(ids[i], ids[i + 1])) {
                heap.push(Reverse((m.rank, i, ids[i], ids[i + 1])));
            }
        }

        while let Some(Reverse((_, pos, left, right))) = heap.pop() {
            let nx = next[pos];
            if !alive[pos] || nx == NONE || ids[pos] != left || ids[nx] != right {
                continue;
            }
            let merged = self.merge_table[&(left, right)].merged;
            ids[pos] = merged;
            alive[nx] = false;
            next[pos] = next[nx];
            if next[pos] != NONE {
                prev[next[pos]] = pos;
            }
            if prev[pos] != NONE {
                let p = prev[pos];
                if let Some(m) = self.merge_table.get(&(ids[p], merged)) {
                    heap.push(Reverse((m.rank, p, ids[p], merged)));
                }
            }
            if next[pos] != NONE {
                let q = next[pos];
                if let Some(m) = self.merge_table.get(&(merged, ids[q])) {
                    heap.push(Reverse((m.rank, pos, merged, ids[q])));
                }
            }
        }

        let mut i = 0;
        while i != NONE {
            out.push(TokenId(ids[i]));
            i = next[i];
        }
    }

    /// Raw bytes of the concatenated tokens.
    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>, TokenizerError> {
        let mut out = Vec::new();
        for &id in ids {
            let bytes = self.token_bytes.get(id.index()).ok_or(TokenizerError::UnknownId(id))?;
            out.extend_from_slice(bytes);
        }
        Ok(out)
    }

    /// Decodes to text. Byte sequences that are not valid UTF-8 (possible
    /// when decoding a token that holds part of a character) are replaced
    /// with U+FFFD.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let bytes = self.decode_bytes(ids)?;
        Ok(match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        })
    }

    /// Decoded text of a single token.
    pub fn token_text(&self, id: TokenId) -> Result<String, TokenizerError> {
        self.decode(&[id])
    }
}
