use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a token inside the vocabulary that owns it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for TokenId {
    fn from(i: usize) -> Self {
        TokenId(i as u32)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("duplicate token {0:?} in vocabulary")]
    Duplicate(String),
    #[error("special token {0:?} is not a vocabulary entry")]
    UnknownSpecial(String),
}

/// Ordered token strings with the reverse lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, TokenId>,
    specials: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new<I, S>(entries: I, specials: &[String]) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: Vec<String> = entries.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(entries.len());
        for (i, tok) in entries.iter().enumerate() {
            if index.insert(tok.clone(), TokenId::from(i)).is_some() {
                return Err(VocabError::Duplicate(tok.clone()));
            }
        }
        let specials: BTreeSet<String> = specials.iter().cloned().collect();
        if let Some(missing) = specials.iter().find(|s| !index.contains_key(*s)) {
            return Err(VocabError::UnknownSpecial(missing.clone()));
        }
        Ok(Self { entries, index, specials })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.entries.get(id.index()).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn is_special(&self, token: &str) -> bool {
        self.specials.contains(token)
    }

    pub fn specials(&self) -> &BTreeSet<String> {
        &self.specials
    }

    /// Tokens in id order.
    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &str)> + '_ {
        self.entries.iter().enumerate().map(|(i, t)| (TokenId::from(i), t.as_str()))
    }
}

/// Split of the new vocabulary into tokens shared with the old one and
/// tokens that only exist in the new one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VocabPartition {
    pub shared: BTreeSet<String>,
    pub unique: BTreeSet<String>,
}

impl VocabPartition {
    pub fn is_shared(&self, token: &str) -> bool {
        self.shared.contains(token)
    }
}

/// Exact string-equality partition of `new`. Whitespace markers are not
/// normalized, so `"▁the"` and `"the"` are different tokens.
pub fn partition_vocab(old: &Vocabulary, new: &Vocabulary) -> VocabPartition {
    let mut part = VocabPartition::default();
    for (_, tok) in new.iter() {
        if old.contains(tok) {
            part.shared.insert(tok.to_owned());
        } else {
            part.unique.insert(tok.to_owned());
        }
    }
    part
}
