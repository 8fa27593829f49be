//! Auxiliary semantic space: unit-normalized text embeddings keyed by token
//! string, read from AUXV1 files, plus an exact cosine kNN index.
//!
//! AUXV1 layout (little-endian):
//!
//! ```text
//! "AUXV1\0"  u32 dim  u64 count
//! count × { u32 key_len, key (UTF-8), dim × f32 }
//! ```

mod knn;
mod pseudo;

use std::borrow::Cow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::math;

pub use knn::{build_index, IndexReport, KnnIndex, Neighbor};
pub use pseudo::PseudoEmbedder;

pub const AUXV1_MAGIC: &[u8; 6] = b"AUXV1\0";

#[derive(Debug, Error)]
pub enum AuxError {
    #[error("not an AUXV1 file")]
    BadMagic,
    #[error("AUXV1 file is truncated")]
    Truncated,
    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("record {record}: key is not valid UTF-8")]
    InvalidKey { record: u64 },
    #[error("vector for {0:?} has zero or non-finite norm")]
    DegenerateVector(String),
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("{0} unexpected bytes after the last record")]
    TrailingBytes(usize),
    #[error("no old-vocabulary token has an auxiliary embedding")]
    EmptyIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query vector has length {found}, index dimension is {expected}")]
    QueryDim { expected: usize, found: usize },
    #[error("query vector is not unit length (norm {0})")]
    QueryNotUnit(f64),
    #[error(transparent)]
    Io(io::Error),
}

fn read_err(e: io::Error) -> AuxError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        AuxError::Truncated
    } else {
        AuxError::Io(e)
    }
}

/// Unit vectors keyed by text. Optionally backed by a [`PseudoEmbedder`]
/// for keys that are not stored (test fixtures only).
#[derive(Debug, Clone)]
pub struct AuxEmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    fallback: Option<PseudoEmbedder>,
    duplicates: usize,
}

impl AuxEmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, AuxError> {
        if dim == 0 {
            return Err(AuxError::ZeroDim);
        }
        Ok(Self { dim, vectors: HashMap::new(), fallback: None, duplicates: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of keys overwritten by a later record during loading.
    pub fn duplicate_keys(&self) -> usize {
        self.duplicates
    }

    /// Normalizes and stores `vector`, replacing any previous entry.
    pub fn insert(&mut self, key: impl Into<String>, vector: &[f32]) -> Result<(), AuxError> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(AuxError::DimMismatch { expected: self.dim, found: vector.len() });
        }
        let unit = math::normalized(vector).ok_or_else(|| AuxError::DegenerateVector(key.clone()))?;
        if self.vectors.insert(key, unit).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    /// Serves deterministic pseudo-embeddings for keys that are not stored.
    /// The vectors carry no meaning; use only for tests and fixtures.
    pub fn with_pseudo_fallback(mut self, embedder: PseudoEmbedder) -> Self {
        assert_eq!(embedder.dim(), self.dim, "fallback dimension must match store");
        self.fallback = Some(embedder);
        self
    }

    pub fn has_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    /// Stored vector only, ignoring any fallback.
    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    /// Stored vector, or the fallback's vector when one is configured.
    pub fn embed(&self, text: &str) -> Option<Cow<'_, [f32]>> {
        match self.vectors.get(text) {
            Some(v) => Some(Cow::Borrowed(v)),
            None => self.fallback.as_ref().map(|f| Cow::Owned(f.embed(text))),
        }
    }

    /// Keys in sorted order.
    pub fn keys_sorted(&self) -> Vec<&str> {
        let mut keys: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        keys.sort_unstable();
        keys
    }

    pub fn read_from<R: Read>(reader: &mut R) -> Result<Self, AuxError> {
        let mut magic = [0u8; 6];
        reader.read_exact(&mut magic).map_err(read_err)?;
        if &magic != AUXV1_MAGIC {
            return Err(AuxError::BadMagic);
        }
        let mut u32_buf = [0u8; 4];
        let mut u64_buf = [0u8; 8];
        reader.read_exact(&mut u32_buf).map_err(read_err)?;
        let dim = u32::from_le_bytes(u32_buf) as usize;
        reader.read_exact(&mut u64_buf).map_err(read_err)?;
        let count = u64::from_le_bytes(u64_buf);

        let mut store = Self::new(dim)?;
        let mut vec_bytes = vec![0u8; dim * 4];
        let mut vector = vec![0f32; dim];
        for record in 0..count {
            reader.read_exact(&mut u32_buf).map_err(read_err)?;
            let key_len = u32::from_le_bytes(u32_buf) as usize;
            let mut key = Vec::new();
            reader.by_ref().take(key_len as u64).read_to_end(&mut key).map_err(read_err)?;
            if key.len() != key_len {
                return Err(AuxError::Truncated);
            }
            let key = String::from_utf8(key).map_err(|_| AuxError::InvalidKey { record })?;
            reader.read_exact(&mut vec_bytes).map_err(read_err)?;
            for (v, chunk) in vector.iter_mut().zip(vec_bytes.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            store.insert(key, &vector)?;
        }

        let mut rest = Vec::new();
        reader.read_to_end(&mut rest).map_err(AuxError::Io)?;
        if !rest.is_empty() {
            // a body longer than count × record size means the header dim is wrong
            return Err(AuxError::TrailingBytes(rest.len()));
        }
        if store.duplicates > 0 {
            log::warn!("{} duplicate keys in AUXV1 input, last record kept", store.duplicates);
        }
        Ok(store)
    }

    /// Writes stored vectors (not fallback vectors) in sorted key order.
    pub fn write_to<W: Write>(&self, writer: &mut W) -> io::Result<()> {
        writer.write_all(AUXV1_MAGIC)?;
        writer.write_all(&(self.dim as u32).to_le_bytes())?;
        writer.write_all(&(self.vectors.len() as u64).to_le_bytes())?;
        for key in self.keys_sorted() {
            writer.write_all(&(key.len() as u32).to_le_bytes())?;
            writer.write_all(key.as_bytes())?;
            for x in &self.vectors[key] {
                writer.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

pub fn load_store(path: impl AsRef<Path>) -> Result<AuxEmbeddingStore, AuxError> {
    let mut reader = BufReader::new(File::open(path).map_err(AuxError::Io)?);
    AuxEmbeddingStore::read_from(&mut reader)
}

/// Loads a store and checks its dimension.
pub fn load_store_with_dim(path: impl AsRef<Path>, dim: usize) -> Result<AuxEmbeddingStore, AuxError> {
    let store = load_store(path)?;
    if store.dim() != dim {
        return Err(AuxError::DimMismatch { expected: dim, found: store.dim() });
    }
    Ok(store)
}

pub fn save_store(store: &AuxEmbeddingStore, path: impl AsRef<Path>) -> Result<(), AuxError> {
    let mut w = BufWriter::new(File::create(path).map_err(AuxError::Io)?);
    store.write_to(&mut w).map_err(AuxError::Io)?;
    w.flush().map_err(AuxError::Io)
}
