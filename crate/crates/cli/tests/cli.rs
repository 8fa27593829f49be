mod common;

use std::fs;

use common::*;
use tokengraft::tensor_io::{read_tensors, INPUT_TENSOR, OUTPUT_TENSOR};

fn corpus(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("corpus.txt");
    let text: String =
        (0..40).map(|i| format!("the quick brown fox jumps over the lazy dog {i}\n")).collect();
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&run(&["--help"], dir.path()));
    assert_ok(&run(&["--version"], dir.path()));
    assert_ok(&run(&["transplant", "--help"], dir.path()));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    assert_eq!(code(&run(&["no-such-command"], dir.path())), 1);
    assert_eq!(code(&run(&["train-bpe", "--corpus", p(&c)], dir.path())), 1);
    assert_eq!(
        code(&run(&["train-bpe", "--corpus", p(&c), "--vocab-size", "12", "--out", "t.json"], dir.path())),
        1
    );
    let bad_dist = run(
        &[
            "train-supertokenizer",
            "--corpus",
            p(&c),
            "--vocab-size",
            "300",
            "--out",
            "t.json",
            "--chunk-dist",
            "1:0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&bad_dist), 1);
    let bad_sep = run(
        &[
            "train-supertokenizer",
            "--corpus",
            p(&c),
            "--vocab-size",
            "300",
            "--out",
            "t.json",
            "--separator",
            "zz",
        ],
        dir.path(),
    );
    assert_eq!(code(&bad_sep), 1);
    let threads = run_threads(
        &["train-bpe", "--corpus", p(&c), "--vocab-size", "300", "--out", "t.json"],
        dir.path(),
        0,
    );
    assert_eq!(code(&threads), 1);
    assert!(!dir.path().join("t.json").exists());
}

#[test]
fn input_format_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_golden(dir.path());
    fs::write(dir.path().join("broken.json"), "{\"version\": 1,").unwrap();
    let o = run(
        &[
            "transplant",
            "--old-tokenizer",
            "broken.json",
            "--new-tokenizer",
            p(&g.new),
            "--embeddings",
            p(&g.embeddings),
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let bytes = fs::read(&g.embeddings).unwrap();
    fs::write(dir.path().join("short.tensors"), &bytes[..bytes.len() - 3]).unwrap();
    let o = run(
        &[
            "transplant",
            "--old-tokenizer",
            p(&g.old),
            "--new-tokenizer",
            p(&g.new),
            "--embeddings",
            "short.tensors",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);

    fs::write(dir.path().join("bad.jsonl"), "{\"text\": \"ok\"}\n{\"txt\": 1}\n").unwrap();
    let o = run(
        &[
            "train-bpe",
            "--corpus",
            "bad.jsonl",
            "--format",
            "jsonl",
            "--vocab-size",
            "260",
            "--out",
            "t.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.jsonl:2"));
}

#[test]
fn transplant_flag_checks() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_golden(dir.path());
    let base = [
        "transplant",
        "--old-tokenizer",
        p(&g.old),
        "--new-tokenizer",
        p(&g.new),
        "--embeddings",
        p(&g.embeddings),
        "--out",
        "o.tensors",
    ];
    // tokenadapt needs auxiliary embeddings once unique tokens exist
    assert_eq!(code(&run(&base, dir.path())), 1);
    let mut w = base.to_vec();
    w.extend(["--aux", p(&g.aux), "--w-glob", "1.5"]);
    assert_eq!(code(&run(&w, dir.path())), 1);
    let mut t = base.to_vec();
    t.extend(["--aux", p(&g.aux), "--threshold", "-0.5"]);
    assert_ok(&run(&t, dir.path()));
}

#[test]
fn untied_requires_output_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_golden(dir.path());
    let mut tensors = read_tensors(&g.embeddings).unwrap();
    tensors.remove(OUTPUT_TENSOR);
    tokengraft::tensor_io::write_tensors(&tensors, dir.path().join("tied.tensors")).unwrap();
    let o = run(
        &[
            "transplant",
            "--old-tokenizer",
            p(&g.old),
            "--new-tokenizer",
            p(&g.new),
            "--embeddings",
            "tied.tensors",
            "--untied",
            "--method",
            "mean",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

fn assert_matches(actual: &tokengraft::EmbeddingMatrix, expected: &serde_json::Value) {
    let rows: Vec<Vec<f64>> = serde_json::from_value(expected.clone()).unwrap();
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            assert!((f64::from(actual.row(i)[j]) - e).abs() <= 1e-5, "[{i}][{j}]");
        }
    }
}

#[test]
fn transplant_writes_tensors_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_golden(dir.path());
    let gold = golden();
    for (method, extra, key) in [
        ("retok", vec![], "retok"),
        ("tokenadapt", vec!["--aux", p(&g.aux), "--k", "3", "--w-glob", "0"], "tokenadapt_w0"),
        ("tokenadapt", vec!["--aux", p(&g.aux), "--k", "3"], "tokenadapt_w0.3"),
    ] {
        let mut args = vec![
            "transplant",
            "--old-tokenizer",
            p(&g.old),
            "--new-tokenizer",
            p(&g.new),
            "--embeddings",
            p(&g.embeddings),
            "--untied",
            "--method",
            method,
            "--out",
            "out.tensors",
        ];
        args.extend(extra);
        assert_ok(&run(&args, dir.path()));
        let out = read_tensors(dir.path().join("out.tensors")).unwrap();
        assert_matches(&out[INPUT_TENSOR], &gold["expected"][key]["input"]);
        assert_matches(&out[OUTPUT_TENSOR], &gold["expected"][key]["output"]);
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out.tensors.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["method"], "tokenadapt");
    assert_eq!(report["options"]["heuristic"]["global_weight"], 0.3);
    assert_eq!(report["counts"]["shared"], 5);
    assert_eq!(report["tokens"].as_array().unwrap().len(), 8);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out.tensors.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["subcommand"], "transplant");
    assert_eq!(manifest["config"]["method"], "tokenadapt");
    assert_eq!(manifest["config"]["heuristic"]["temperature"], 0.6);
    assert_eq!(manifest["config"]["heuristic"]["k_neighbors"], 3);
    let roles: Vec<&str> =
        manifest["inputs"].as_array().unwrap().iter().map(|i| i["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["old_tokenizer", "new_tokenizer", "embeddings", "aux"]);
    for f in manifest["inputs"].as_array().unwrap().iter().chain(manifest["outputs"].as_array().unwrap()) {
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn tied_model_writes_only_input_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_golden(dir.path());
    let o = run(
        &[
            "transplant",
            "--old-tokenizer",
            p(&g.old),
            "--new-tokenizer",
            p(&g.new),
            "--embeddings",
            p(&g.embeddings),
            "--method",
            "mean",
            "--out",
            "o.tensors",
        ],
        dir.path(),
    );
    assert_ok(&o);
    let out = read_tensors(dir.path().join("o.tensors")).unwrap();
    assert_eq!(out.keys().collect::<Vec<_>>(), [INPUT_TENSOR]);
    assert_matches(&out[INPUT_TENSOR], &golden()["expected"]["mean"]["input"]);
}

#[test]
fn training_and_compression_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    assert_ok(&run(
        &["train-bpe", "--corpus", p(&c), "--vocab-size", "300", "--special", "<s>", "--out", "bpe.json"],
        dir.path(),
    ));
    assert_ok(&run(
        &[
            "train-supertokenizer",
            "--corpus",
            p(&c),
            "--vocab-size",
            "320",
            "--chunk-dist",
            "2:0.5,3:0.5",
            "--out",
            "super.json",
        ],
        dir.path(),
    ));
    let o = run(
        &[
            "eval-compression",
            "--tokenizer",
            "bpe.json",
            "--tokenizer",
            "st=super.json",
            "--corpus",
            &format!("web={}", p(&c)),
            "--csv",
            "table.csv",
            "--histogram",
        ],
        dir.path(),
    );
    assert_ok(&o);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().next().unwrap().starts_with("corpus"));
    assert!(stdout.contains("words per token: st on web"));

    let csv = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tokenizer,corpus,total_tokens,corpus_bytes,bytes_per_token");
    assert!(lines[1].starts_with("bpe,web,"));
    assert!(lines[2].starts_with("st,web,"));
    let tokens = |l: &str| l.split(',').nth(2).unwrap().parse::<u64>().unwrap();
    assert!(tokens(lines[2]) < tokens(lines[1]));

    for m in ["bpe.json.manifest.json", "super.json.manifest.json", "table.csv.manifest.json"] {
        assert!(dir.path().join(m).exists(), "{m}");
    }
}

#[test]
fn pseudo_aux_covers_every_token() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_golden(dir.path());
    assert_ok(&run(
        &["pseudo-aux", "--tokenizer", p(&g.old), "--tokenizer", p(&g.new), "--dim", "8", "--out", "p.aux"],
        dir.path(),
    ));
    let store = tokengraft::auxiliary::load_store(dir.path().join("p.aux")).unwrap();
    assert_eq!(store.dim(), 8);
    // a b c d ab cd bc abc dab
    assert_eq!(store.len(), 9);
}

#[test]
fn rerun_gives_identical_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let args =
        ["train-supertokenizer", "--corpus", p(&c), "--vocab-size", "300", "--seed", "7", "--out", "s.json"];
    assert_ok(&run(&args, dir.path()));
    let first = fs::read(dir.path().join("s.json.manifest.json")).unwrap();
    assert_ok(&run(&args, dir.path()));
    assert_eq!(first, fs::read(dir.path().join("s.json.manifest.json")).unwrap());
}
