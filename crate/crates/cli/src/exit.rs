use std::fmt;

use tokengraft::auxiliary::AuxError;
use tokengraft::bpe::TokenizerError;
use tokengraft::compression::CompressionError;
use tokengraft::config::ConfigError;
use tokengraft::corpus::CorpusError;
use tokengraft::supertoken::SupertokenError;
use tokengraft::tensor_io::TensorError;
use tokengraft::transplant::TransplantError;

pub const SUCCESS: u8 = 0;
pub const USAGE: u8 = 1;
pub const INPUT: u8 = 2;
pub const INTERNAL: u8 = 3;

/// A bad flag value or flag combination that clap cannot catch on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Malformed or inconsistent input files.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn tokenizer_code(e: &TokenizerError) -> u8 {
    match e {
        TokenizerError::VocabTooSmall { .. } => USAGE,
        _ => INPUT,
    }
}

/// Maps the first recognized error in the chain to an exit code. Anything
/// unrecognized is treated as a broken internal invariant.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<ConfigError>() {
            return USAGE;
        }
        if cause.is::<InputError>()
            || cause.is::<CorpusError>()
            || cause.is::<AuxError>()
            || cause.is::<TensorError>()
            || cause.is::<CompressionError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
        {
            return INPUT;
        }
        if let Some(e) = cause.downcast_ref::<TokenizerError>() {
            return tokenizer_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SupertokenError>() {
            return match e {
                SupertokenError::Tokenizer(t) => tokenizer_code(t),
                _ => USAGE,
            };
        }
        if let Some(e) = cause.downcast_ref::<TransplantError>() {
            return match e {
                TransplantError::Config(_)
                | TransplantError::MissingStore
                | TransplantError::SpecialMapping { .. } => USAGE,
                TransplantError::RowCount { .. }
                | TransplantError::DimMismatch { .. }
                | TransplantError::Aux(_) => INPUT,
            };
        }
    }
    INTERNAL
}
