use serde::{Deserialize, Serialize};

/// How text is cut into pieces before merges are applied. Merges never
/// cross a piece boundary.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PreTokenizer {
    /// Whitespace attaches to the following word: `"a  b "` becomes
    /// `["a", "  b", " "]`.
    #[default]
    Whitespace,
    /// Every segment between separators is one piece, whitespace included.
    /// A separator occurring in the input becomes a piece of its own, so
    /// encoding stays lossless while no merge crosses it.
    Chunked { separator: String },
}

impl PreTokenizer {
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            PreTokenizer::Whitespace => split_words(text),
            PreTokenizer::Chunked { separator } => {
                let mut pieces = Vec::new();
                let mut start = 0;
                for (at, sep) in text.match_indices(separator.as_str()) {
                    if at > start {
                        pieces.push(&text[start..at]);
                    }
                    pieces.push(sep);
                    start = at + sep.len();
                }
                if start < text.len() {
                    pieces.push(&text[start..]);
                }
                pieces
            }
        }
    }
}

/// Splits into runs of `\s*\S+`, with a trailing whitespace-only run kept
/// as its own piece. Concatenating the output reproduces `text`.
pub fn split_words(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut prev_ws = true;
    let mut seen_word = false;
    for (i, c) in text.char_indices() {
        let ws = c.is_whitespace();
        if ws && !prev_ws && seen_word {
            pieces.push(&text[start..i]);
            start = i;
            seen_word = false;
        }
        if !ws {
            seen_word = true;
        }
        prev_ws = ws;
    }
    if start < text.len() {
        pieces.push(&text[start..]);
    }
    pieces
}
