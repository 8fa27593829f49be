//! Tokenizer compression benchmarks: total tokens, bytes per token and the
//! distribution of words per token type.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bpe::BpeTokenizer;
use crate::vocab::TokenId;

#[derive(Debug, Error)]
pub enum CompressionError {
    #[error("corpus {0:?} is empty")]
    EmptyCorpus(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressionStats {
    pub corpus_bytes: u64,
    pub total_tokens: u64,
    pub bytes_per_token: f64,
    pub unique_token_types_used: u64,
}

impl CompressionStats {
    pub fn new(corpus_bytes: u64, total_tokens: u64, unique_token_types_used: u64) -> Self {
        let bytes_per_token = if total_tokens > 0 { corpus_bytes as f64 / total_tokens as f64 } else { 0.0 };
        Self { corpus_bytes, total_tokens, bytes_per_token, unique_token_types_used }
    }

    /// Bytes per token rounded half away from zero to three decimals.
    pub fn bytes_per_token_display(&self) -> String {
        format!("{:.3}", round3(self.bytes_per_token))
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Encodes every document (in parallel) and returns per-document ids.
fn encode_all<S: AsRef<str> + Sync>(tok: &BpeTokenizer, docs: &[S]) -> Vec<(usize, Vec<TokenId>)> {
    docs.par_iter().map(|d| (d.as_ref().len(), tok.encode(d.as_ref()))).collect()
}

pub fn eval_compression<S: AsRef<str> + Sync>(
    tok: &BpeTokenizer,
    docs: &[S],
) -> Result<CompressionStats, CompressionError> {
    if docs.iter().all(|d| d.as_ref().is_empty()) {
        return Err(CompressionError::EmptyCorpus(String::new()));
    }
    let mut bytes = 0u64;
    let mut tokens = 0u64;
    let mut types = BTreeSet::new();
    for (len, ids) in encode_all(tok, docs) {
        bytes += len as u64;
        tokens += ids.len() as u64;
        types.extend(ids);
    }
    Ok(CompressionStats::new(bytes, tokens, types.len() as u64))
}

/// Maximal runs of non-whitespace characters.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Token types (or occurrences) binned by how many words they decode to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WordCountHistogram {
    pub bins: BTreeMap<usize, u64>,
}

impl WordCountHistogram {
    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    /// Mass in bins with at least `words` words.
    pub fn at_least(&self, words: usize) -> u64 {
        self.bins.range(words..).map(|(_, c)| c).sum()
    }
}

/// Histogram over the distinct token ids used when encoding `docs`.
pub fn word_count_histogram<S: AsRef<str> + Sync>(tok: &BpeTokenizer, docs: &[S]) -> WordCountHistogram {
    histogram(tok, docs, false)
}

/// Same bins, but every occurrence counts.
pub fn word_count_histogram_weighted<S: AsRef<str> + Sync>(
    tok: &BpeTokenizer,
    docs: &[S],
) -> WordCountHistogram {
    histogram(tok, docs, true)
}

fn histogram<S: AsRef<str> + Sync>(tok: &BpeTokenizer, docs: &[S], weighted: bool) -> WordCountHistogram {
    let mut occurrences: BTreeMap<TokenId, u64> = BTreeMap::new();
    for (_, ids) in encode_all(tok, docs) {
        for id in ids {
            *occurrences.entry(id).or_default() += 1;
        }
    }
    let mut hist = WordCountHistogram::default();
    for (id, n) in occurrences {
        let text = tok.token_text(id).expect("encoded id is valid");
        *hist.bins.entry(count_words(&text)).or_default() += if weighted { n } else { 1 };
    }
    hist
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonCell {
    pub tokenizer: String,
    pub corpus: String,
    pub stats: CompressionStats,
}

/// Stats for every (tokenizer, corpus) pair, tokenizer-major.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub tokenizers: Vec<String>,
    pub corpora: Vec<String>,
    pub cells: Vec<ComparisonCell>,
}

pub fn compare_tokenizers(
    toks: &[(String, &BpeTokenizer)],
    corpora: &[(String, Vec<String>)],
) -> Result<ComparisonTable, CompressionError> {
    let mut cells = Vec::with_capacity(toks.len() * corpora.len());
    for (tname, tok) in toks {
        for (cname, docs) in corpora {
            let stats = eval_compression(tok, docs).map_err(|e| match e {
                CompressionError::EmptyCorpus(_) => CompressionError::EmptyCorpus(cname.clone()),
                other => other,
            })?;
            cells.push(ComparisonCell { tokenizer: tname.clone(), corpus: cname.clone(), stats });
        }
    }
    Ok(ComparisonTable {
        tokenizers: toks.iter().map(|t| t.0.clone()).collect(),
        corpora: corpora.iter().map(|c| c.0.clone()).collect(),
        cells,
    })
}

impl ComparisonTable {
    pub fn cell(&self, tokenizer: &str, corpus: &str) -> Option<&CompressionStats> {
        self.cells.iter().find(|c| c.tokenizer == tokenizer && c.corpus == corpus).map(|c| &c.stats)
    }

    /// Total tokens per cell, corpora as rows and tokenizers as columns.
    pub fn render_text(&self) -> String {
        let mut header = vec!["corpus".to_string()];
        header.extend(self.tokenizers.iter().cloned());
        let mut rows = vec![header];
        for corpus in &self.corpora {
            let mut row = vec![corpus.clone()];
            for tok in &self.tokenizers {
                let s = self.cell(tok, corpus).expect("cell exists");
                row.push(format!("{} ({} B/tok)", s.total_tokens, s.bytes_per_token_display()));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CompressionError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tokenizer", "corpus", "total_tokens", "corpus_bytes", "bytes_per_token"])?;
        for c in &self.cells {
            w.write_record([
                c.tokenizer.as_str(),
                c.corpus.as_str(),
                &c.stats.total_tokens.to_string(),
                &c.stats.corpus_bytes.to_string(),
                &c.stats.bytes_per_token_display(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::{byte_level, train_bpe, PreTokenizer};

    fn byte_tokenizer() -> BpeTokenizer {
        let entries = (0..=255u8).map(|b| byte_level::byte_to_char(b).to_string()).collect();
        BpeTokenizer::from_parts(entries, vec![], vec![], PreTokenizer::Whitespace).unwrap()
    }

    #[test]
    fn bytes_per_token_rounding() {
        assert_eq!(CompressionStats::new(203, 32, 0).bytes_per_token_display(), "6.344");
        assert_eq!(CompressionStats::new(1, 16, 0).bytes_per_token_display(), "0.063");
    }

    #[test]
    fn byte_vocab_uses_one_token_per_byte() {
        let docs = ["héllo wörld", "🦀 crab"];
        let s = eval_compression(&byte_tokenizer(), &docs).unwrap();
        let bytes: u64 = docs.iter().map(|d| d.len() as u64).sum();
        assert_eq!(s.total_tokens, bytes);
        assert_eq!(s.corpus_bytes, bytes);
        assert_eq!(s.bytes_per_token, 1.0);
    }

    #[test]
    fn single_token_corpus() {
        let tok = train_bpe(["abcd"; 10], 300, &[]).unwrap();
        let s = eval_compression(&tok, &["abcd"]).unwrap();
        assert_eq!(s.total_tokens, 1);
        assert_eq!(s.bytes_per_token, 4.0);
        assert_eq!(s.unique_token_types_used, 1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(eval_compression(&byte_tokenizer(), &Vec::<String>::new()).is_err());
        assert!(eval_compression(&byte_tokenizer(), &[""]).is_err());
    }

    #[test]
    fn batching_does_not_change_totals() {
        let tok = train_bpe(["some text for the tokenizer to chew on"; 4], 300, &[]).unwrap();
        let docs = ["some text", "for the", "tokenizer to chew on", "extra words here"];
        let whole = eval_compression(&tok, &docs).unwrap();
        let parts: u64 = docs.chunks(1).map(|c| eval_compression(&tok, c).unwrap().total_tokens).sum();
        assert_eq!(whole.total_tokens, parts);
    }

    #[test]
    fn word_counts() {
        assert_eq!(count_words("hello world"), 2);
        assert_eq!(count_words(" the"), 1);
        assert_eq!(count_words("  "), 0);
        assert_eq!(count_words("a\tb\nc"), 3);
    }

    #[test]
    fn histogram_counts_types_not_occurrences() {
        let tok = byte_tokenizer();
        let docs = ["aa b"];
        let h = word_count_histogram(&tok, &docs);
        // types: 'a', ' ', 'b' → bins {0: 1, 1: 2}
        assert_eq!(h.bins, BTreeMap::from([(0, 1), (1, 2)]));
        assert_eq!(h.total(), 3);
        let w = word_count_histogram_weighted(&tok, &docs);
        assert_eq!(w.bins, BTreeMap::from([(0, 1), (1, 3)]));
    }

    #[test]
    fn table_and_csv() {
        let a = byte_tokenizer();
        let b = train_bpe(["x y z"; 3], 300, &[]).unwrap();
        let table = compare_tokenizers(
            &[("bytes".into(), &a), ("bpe".into(), &b)],
            &[("c1".into(), vec!["x y z".into()])],
        )
        .unwrap();
        let text = table.render_text();
        assert!(text.starts_with("corpus"));
        assert!(text.contains("5 (1.000 B/tok)"));
        let mut csv_out = Vec::new();
        table.write_csv(&mut csv_out).unwrap();
        let csv_out = String::from_utf8(csv_out).unwrap();
        let mut lines = csv_out.lines();
        assert_eq!(lines.next(), Some("tokenizer,corpus,total_tokens,corpus_bytes,bytes_per_token"));
        assert_eq!(lines.next(), Some("bytes,c1,5,5,1.000"));

        let err = compare_tokenizers(&[("bytes".into(), &a)], &[("empty".into(), vec![])]).unwrap_err();
        assert!(err.to_string().contains("empty"));
    }
}
