#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tokengraft::auxiliary::save_store;
use tokengraft::tensor_io::{write_tensors, TensorMap, INPUT_TENSOR, OUTPUT_TENSOR};
use tokengraft::transplant::{EmbeddingMatrix, MatrixRole};
use tokengraft::AuxEmbeddingStore;

pub const GOLDEN: &str = include_str!("../../../core/tests/fixtures/golden_transplant.json");

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tokengraft"));
    c.env_remove("TOKENGRAFT_THREADS").env_remove("RUST_LOG");
    c
}

pub fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn tokengraft")
}

pub fn run_threads(args: &[&str], dir: &Path, threads: usize) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .env("TOKENGRAFT_THREADS", threads.to_string())
        .output()
        .expect("spawn tokengraft")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn assert_ok(o: &Output) {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

pub fn golden() -> serde_json::Value {
    serde_json::from_str(GOLDEN).unwrap()
}

fn matrix(v: &serde_json::Value, role: MatrixRole) -> EmbeddingMatrix {
    let rows: Vec<Vec<f32>> = serde_json::from_value(v.clone()).unwrap();
    EmbeddingMatrix::from_rows(&rows, role).unwrap()
}

/// Writes the toy fixture's tokenizers, untied embeddings and aux vectors.
pub struct GoldenFiles {
    pub old: PathBuf,
    pub new: PathBuf,
    pub embeddings: PathBuf,
    pub aux: PathBuf,
}

pub fn write_golden(dir: &Path) -> GoldenFiles {
    let g = golden();
    let files = GoldenFiles {
        old: dir.join("old.json"),
        new: dir.join("new.json"),
        embeddings: dir.join("model.tensors"),
        aux: dir.join("aux.bin"),
    };
    std::fs::write(&files.old, g["old_tokenizer"].to_string()).unwrap();
    std::fs::write(&files.new, g["new_tokenizer"].to_string()).unwrap();
    let mut map = TensorMap::new();
    map.insert(INPUT_TENSOR.into(), matrix(&g["embed_input"], MatrixRole::Input));
    map.insert(OUTPUT_TENSOR.into(), matrix(&g["embed_output"], MatrixRole::Output));
    write_tensors(&map, &files.embeddings).unwrap();
    let aux: BTreeMap<String, Vec<f32>> = serde_json::from_value(g["aux"].clone()).unwrap();
    let mut store = AuxEmbeddingStore::new(3).unwrap();
    for (k, v) in aux {
        store.insert(k, &v).unwrap();
    }
    save_store(&store, &files.aux).unwrap();
    files
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
