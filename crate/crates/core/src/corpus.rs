//! Corpus readers: one document per line, or JSON lines with a `text` field.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    #[default]
    Lines,
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lines" => Ok(CorpusFormat::Lines),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format {other:?} (expected lines or jsonl)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
}

#[derive(Deserialize)]
struct JsonDoc {
    text: String,
}

/// Reads every non-empty document from `path`.
pub fn read_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<String>, CorpusError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let io_err = |source| CorpusError::Io { path: shown.clone(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        match format {
            CorpusFormat::Lines => docs.push(line.to_owned()),
            CorpusFormat::Jsonl => {
                let doc: JsonDoc = serde_json::from_str(line).map_err(|e| CorpusError::Format {
                    path: shown.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if !doc.text.is_empty() {
                    docs.push(doc.text);
                }
            }
        }
    }
    Ok(docs)
}
