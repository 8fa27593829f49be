//! Tokenizer JSON document:
//! `{"version":1,"byte_level":true,"specials":[..],"vocab":{"tok":id,..},"merges":[["l","r"],..]}`.
//!
//! `vocab` is written in id order and `merges` in rank order. An optional
//! `pre_tokenizer` object records chunked pre-tokenization for
//! supertokenizers; when absent the whitespace pre-tokenizer is used.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use super::{BpeTokenizer, PreTokenizer, TokenizerError};

pub const TOKENIZER_FORMAT_VERSION: u32 = 1;

struct OrderedVocab<'a>(&'a [String]);

impl Serialize for OrderedVocab<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (id, tok) in self.0.iter().enumerate() {
            map.serialize_entry(tok, &id)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct FileOut<'a> {
    version: u32,
    byte_level: bool,
    specials: Vec<&'a str>,
    vocab: OrderedVocab<'a>,
    merges: Vec<[&'a str; 2]>,
    #[serde(skip_serializing_if = "is_whitespace")]
    pre_tokenizer: &'a PreTokenizer,
}

fn is_whitespace(p: &&PreTokenizer) -> bool {
    **p == PreTokenizer::Whitespace
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    version: u32,
    byte_level: bool,
    specials: Vec<String>,
    vocab: HashMap<String, u32>,
    merges: Vec<[String; 2]>,
    #[serde(default)]
    pre_tokenizer: PreTokenizer,
}

impl BpeTokenizer {
    pub fn to_json(&self) -> String {
        let specials =
            self.vocab.entries().iter().filter(|t| self.vocab.is_special(t)).map(String::as_str).collect();
        let doc = FileOut {
            version: TOKENIZER_FORMAT_VERSION,
            byte_level: true,
            specials,
            vocab: OrderedVocab(self.vocab.entries()),
            merges: self.merges.iter().map(|(l, r)| [l.as_str(), r.as_str()]).collect(),
            pre_tokenizer: &self.pre_tokenizer,
        };
        serde_json::to_string(&doc).expect("tokenizer serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TokenizerError> {
        let doc: FileIn = serde_json::from_str(text).map_err(|e| TokenizerError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if doc.version != TOKENIZER_FORMAT_VERSION {
            return Err(TokenizerError::Unsupported(format!("version {}", doc.version)));
        }
        if !doc.byte_level {
            return Err(TokenizerError::Unsupported("byte_level must be true".into()));
        }
        let n = doc.vocab.len();
        let mut entries: Vec<Option<String>> = vec![None; n];
        for (tok, id) in doc.vocab {
            let slot = entries
                .get_mut(id as usize)
                .ok_or_else(|| TokenizerError::Unsupported(format!("id {id} outside 0..{n}")))?;
            if slot.replace(tok).is_some() {
                return Err(TokenizerError::Unsupported(format!("id {id} assigned twice")));
            }
        }
        // n slots filled by n distinct ids, so every slot is Some
        let entries = entries.into_iter().map(Option::unwrap).collect();
        let merges = doc.merges.into_iter().map(|[l, r]| (l, r)).collect();
        BpeTokenizer::from_parts(entries, merges, doc.specials, doc.pre_tokenizer)
    }
}

pub fn save_tokenizer(tok: &BpeTokenizer, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
    fs::write(path, tok.to_json())?;
    Ok(())
}

pub fn load_tokenizer(path: impl AsRef<Path>) -> Result<BpeTokenizer, TokenizerError> {
    let text = fs::read_to_string(path)?;
    BpeTokenizer::from_json(&text)
}
