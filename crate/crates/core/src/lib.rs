//! Tokenizer transplantation toolkit.
//!
//! - [`bpe`]: byte-level BPE training, encoding, decoding and JSON persistence.
//! - [`supertoken`]: chunk-augmented BPE training that learns multi-word tokens.
//! - [`auxiliary`]: auxiliary embedding store (AUXV1 files) and exact cosine kNN.
//! - [`transplant`]: embedding initialization for a new vocabulary (hybrid
//!   local/global heuristic plus ReTok, mean and random baselines).
//! - [`compression`]: tokens-used, bytes-per-token and word-count histograms.
//! - [`tensor_io`]: reader/writer for the embedding tensor file format.

pub mod auxiliary;
pub mod bpe;
pub mod compression;
pub mod config;
pub mod corpus;
pub mod math;
pub mod supertoken;
pub mod tensor_io;
pub mod transplant;
pub mod vocab;

pub use auxiliary::{AuxEmbeddingStore, KnnIndex};
pub use bpe::BpeTokenizer;
pub use config::{HeuristicConfig, LengthUnit};
pub use transplant::{EmbeddingMatrix, ModelEmbeddings, TransplantReport};
pub use vocab::{partition_vocab, TokenId, VocabPartition, Vocabulary};
