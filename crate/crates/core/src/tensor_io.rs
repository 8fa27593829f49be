//! Embedding tensor files.
//!
//! ```text
//! u64 LE header length N | N bytes of JSON header | raw LE payload
//! ```
//!
//! The header maps tensor names to
//! `{"dtype":"F32","shape":[rows,cols],"data_offsets":[begin,end]}` with
//! offsets relative to the payload start. Names are written sorted and the
//! header is space-padded to a multiple of 8 bytes, so identical input
//! always produces identical bytes. Readers skip a `__metadata__` entry.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transplant::{EmbeddingMatrix, MatrixError, MatrixRole};

pub const INPUT_TENSOR: &str = "embed.input";
pub const OUTPUT_TENSOR: &str = "embed.output";

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("file is shorter than its header or declared offsets")]
    Truncated,
    #[error("invalid header: {0}")]
    Header(String),
    #[error("tensor {name:?} has dtype {dtype}, only F32 is supported")]
    Dtype { name: String, dtype: String },
    #[error("tensor {name:?} overlaps the previous tensor")]
    Overlap { name: String },
    #[error("tensor byte ranges do not tile the payload: {0}")]
    Layout(String),
    #[error("tensor {name:?}: {message}")]
    Shape { name: String, message: String },
    #[error("tensor {name:?}: {source}")]
    Matrix { name: String, source: MatrixError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    dtype: String,
    shape: Vec<u64>,
    data_offsets: [u64; 2],
}

pub type TensorMap = BTreeMap<String, EmbeddingMatrix>;

fn role_for(name: &str) -> MatrixRole {
    if name == OUTPUT_TENSOR {
        MatrixRole::Output
    } else {
        MatrixRole::Input
    }
}

pub fn serialize_tensors(tensors: &TensorMap) -> Vec<u8> {
    let mut header = BTreeMap::new();
    let mut offset = 0u64;
    for (name, m) in tensors {
        let len = (m.data().len() * 4) as u64;
        header.insert(
            name.as_str(),
            TensorInfo {
                dtype: "F32".into(),
                shape: vec![m.rows() as u64, m.dim() as u64],
                data_offsets: [offset, offset + len],
            },
        );
        offset += len;
    }
    let mut header = serde_json::to_vec(&header).expect("header serializes");
    while header.len() % 8 != 0 {
        header.push(b' ');
    }

    let mut out = Vec::with_capacity(8 + header.len() + offset as usize);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for m in tensors.values() {
        for x in m.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn deserialize_tensors(bytes: &[u8]) -> Result<TensorMap, TensorError> {
    let header_len: usize = bytes
        .get(..8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .ok_or(TensorError::Truncated)?
        .try_into()
        .map_err(|_| TensorError::Truncated)?;
    let header_end = 8usize.checked_add(header_len).ok_or(TensorError::Truncated)?;
    let header = bytes.get(8..header_end).ok_or(TensorError::Truncated)?;
    let payload = &bytes[header_end..];

    let raw: BTreeMap<String, serde_json::Value> =
        serde_json::from_slice(header).map_err(|e| TensorError::Header(e.to_string()))?;

    let mut entries: Vec<(String, TensorInfo)> = Vec::with_capacity(raw.len());
    for (name, value) in raw {
        if name == "__metadata__" {
            continue;
        }
        let info: TensorInfo =
            serde_json::from_value(value).map_err(|e| TensorError::Header(format!("{name}: {e}")))?;
        if info.dtype != "F32" {
            return Err(TensorError::Dtype { name, dtype: info.dtype });
        }
        let [begin, end] = info.data_offsets;
        if begin > end {
            return Err(TensorError::Layout(format!("{name}: begin {begin} > end {end}")));
        }
        if end > payload.len() as u64 {
            return Err(TensorError::Truncated);
        }
        entries.push((name, info));
    }

    entries.sort_by_key(|(_, info)| info.data_offsets);
    let mut cursor = 0u64;
    for (name, info) in &entries {
        let [begin, _] = info.data_offsets;
        if begin < cursor {
            return Err(TensorError::Overlap { name: name.clone() });
        }
        if begin > cursor {
            return Err(TensorError::Layout(format!("gap before {name:?} at byte {cursor}")));
        }
        cursor = info.data_offsets[1];
    }
    if cursor != payload.len() as u64 {
        return Err(TensorError::Layout(format!("{} trailing payload bytes", payload.len() as u64 - cursor)));
    }

    let mut out = TensorMap::new();
    for (name, info) in entries {
        let [rows, cols] = info.shape[..] else {
            return Err(TensorError::Shape {
                name,
                message: format!("expected a 2-D shape, got {:?}", info.shape),
            });
        };
        let [begin, end] = info.data_offsets;
        let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(4));
        if expected != Some(end - begin) {
            return Err(TensorError::Shape {
                name,
                message: format!("shape {rows}×{cols} needs {expected:?} bytes, range holds {}", end - begin),
            });
        }
        let data: Vec<f32> = payload[begin as usize..end as usize]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = EmbeddingMatrix::new(rows as usize, cols as usize, data, role_for(&name))
            .map_err(|source| TensorError::Matrix { name: name.clone(), source })?;
        out.insert(name, m);
    }
    Ok(out)
}

pub fn write_tensors(tensors: &TensorMap, path: impl AsRef<Path>) -> Result<(), TensorError> {
    fs::write(path, serialize_tensors(tensors))?;
    Ok(())
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<TensorMap, TensorError> {
    deserialize_tensors(&fs::read(path)?)
}
