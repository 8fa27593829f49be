use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use tokengraft::auxiliary::{load_store, save_store, PseudoEmbedder};
use tokengraft::bpe::{load_tokenizer, save_tokenizer, train_bpe as train_word_bpe};
use tokengraft::compression::{compare_tokenizers, word_count_histogram, word_count_histogram_weighted};
use tokengraft::config::HeuristicConfig;
use tokengraft::corpus::{read_corpus, CorpusFormat};
use tokengraft::supertoken::{
    train_supertokenizer as train_super, ChunkLengthDistribution, SupertokenConfig,
};
use tokengraft::tensor_io::{read_tensors, write_tensors, TensorMap, INPUT_TENSOR, OUTPUT_TENSOR};
use tokengraft::transplant::{transplant as run_transplant, ModelEmbeddings, TransplantOptions};
use tokengraft::{AuxEmbeddingStore, BpeTokenizer, TokenId};

use crate::exit::{input, usage};
use crate::manifest::{self, RunManifest};
use crate::{
    CommonTrainArgs, EvalCompressionArgs, PseudoAuxArgs, TrainBpeArgs, TrainSupertokenizerArgs,
    TransplantArgs,
};

fn load_tok(path: &Path) -> Result<BpeTokenizer> {
    load_tokenizer(path).with_context(|| format!("loading tokenizer {}", path.display()))
}

fn load_docs(path: &Path, format: CorpusFormat) -> Result<Vec<String>> {
    let docs = read_corpus(path, format)?;
    log::info!("read {} documents from {}", docs.len(), path.display());
    Ok(docs)
}

#[derive(Serialize)]
struct TrainBpeConfig<'a> {
    format: CorpusFormat,
    vocab_size: usize,
    specials: &'a [String],
}

fn finish_training(mut m: RunManifest, common: &CommonTrainArgs, tok: &BpeTokenizer) -> Result<()> {
    save_tokenizer(tok, &common.out).with_context(|| format!("writing {}", common.out.display()))?;
    log::info!("wrote tokenizer with {} entries to {}", tok.vocab_size(), common.out.display());
    m.input("corpus", &common.corpus)?;
    m.output("tokenizer", &common.out)?;
    m.write(&manifest_path(&common.manifest, &common.out))
}

fn manifest_path(explicit: &Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| manifest::default_path(out))
}

pub fn train_bpe(a: TrainBpeArgs) -> Result<()> {
    let c = &a.common;
    let docs = load_docs(&c.corpus, c.format)?;
    let tok = train_word_bpe(&docs, c.vocab_size, &c.specials)?;
    let m = RunManifest::new(
        "train-bpe",
        c.seed,
        TrainBpeConfig { format: c.format, vocab_size: c.vocab_size, specials: &c.specials },
    )?;
    finish_training(m, c, &tok)
}

fn parse_separator(hex: &str) -> Result<String> {
    let digits = hex.trim().trim_start_matches("U+").trim_start_matches("0x");
    u32::from_str_radix(digits, 16)
        .ok()
        .and_then(char::from_u32)
        .map(String::from)
        .ok_or_else(|| usage(format!("--separator {hex:?} is not a hexadecimal code point")))
}

#[derive(Serialize)]
struct TrainSuperConfig<'a> {
    format: CorpusFormat,
    #[serde(flatten)]
    supertoken: &'a SupertokenConfig,
}

pub fn train_supertokenizer(a: TrainSupertokenizerArgs) -> Result<()> {
    let c = &a.common;
    let dist: ChunkLengthDistribution = a.chunk_dist.parse()?;
    let cfg = SupertokenConfig {
        dist,
        separator: parse_separator(&a.separator)?,
        vocab_size: c.vocab_size,
        specials: c.specials.clone(),
        seed: c.seed,
        unit: a.chunk_unit,
    };
    let docs = load_docs(&c.corpus, c.format)?;
    let tok = train_super(&docs, &cfg)?;
    let m = RunManifest::new(
        "train-supertokenizer",
        c.seed,
        TrainSuperConfig { format: c.format, supertoken: &cfg },
    )?;
    finish_training(m, c, &tok)
}

fn parse_pair(raw: &str, flag: &str) -> Result<(String, String)> {
    raw.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .ok_or_else(|| usage(format!("{flag} expects NAME=VALUE, got {raw:?}")))
}

#[derive(Serialize)]
struct TransplantConfig<'a> {
    untied: bool,
    aux: bool,
    #[serde(flatten)]
    options: &'a TransplantOptions,
}

pub fn transplant(a: TransplantArgs) -> Result<()> {
    let special_map =
        a.map_special.iter().map(|s| parse_pair(s, "--map-special")).collect::<Result<Vec<_>>>()?;
    let opts = TransplantOptions {
        method: a.method,
        heuristic: HeuristicConfig {
            temperature: a.temperature,
            k_neighbors: a.k,
            global_weight: a.w_glob,
            similarity_threshold: a.threshold,
            seed: a.seed,
            length_unit: a.length_unit,
        },
        special_map,
    };
    opts.heuristic.validate()?;

    let old_tok = load_tok(&a.old_tokenizer)?;
    let new_tok = load_tok(&a.new_tokenizer)?;
    let mut tensors = read_tensors(&a.embeddings)
        .with_context(|| format!("reading tensors from {}", a.embeddings.display()))?;
    let e_in = tensors
        .remove(INPUT_TENSOR)
        .ok_or_else(|| input(format!("{} has no {INPUT_TENSOR:?} tensor", a.embeddings.display())))?;
    let model = if a.untied {
        let e_out = tensors.remove(OUTPUT_TENSOR).ok_or_else(|| {
            input(format!("--untied given but {} has no {OUTPUT_TENSOR:?} tensor", a.embeddings.display()))
        })?;
        ModelEmbeddings::untied(e_in, e_out)?
    } else {
        if tensors.contains_key(OUTPUT_TENSOR) {
            log::warn!("{OUTPUT_TENSOR} present but --untied not given; treating the model as tied");
        }
        ModelEmbeddings::tied(e_in)
    };
    let store: Option<AuxEmbeddingStore> = match &a.aux {
        Some(p) => {
            Some(load_store(p).with_context(|| format!("loading auxiliary embeddings {}", p.display()))?)
        }
        None => None,
    };

    let (out_model, report) = run_transplant(&model, &old_tok, &new_tok, store.as_ref(), &opts)?;
    log::info!("{:?}", report.counts);

    let mut out_tensors = TensorMap::new();
    out_tensors.insert(INPUT_TENSOR.into(), out_model.input);
    if let Some(o) = out_model.output {
        out_tensors.insert(OUTPUT_TENSOR.into(), o);
    }
    write_tensors(&out_tensors, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let report_path = a.report.clone().unwrap_or_else(|| manifest::with_suffix(&a.out, ".report.json"));
    fs::write(&report_path, report.to_json() + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;

    let mut m = RunManifest::new(
        "transplant",
        a.seed,
        TransplantConfig { untied: a.untied, aux: a.aux.is_some(), options: &opts },
    )?;
    m.input("old_tokenizer", &a.old_tokenizer)?;
    m.input("new_tokenizer", &a.new_tokenizer)?;
    m.input("embeddings", &a.embeddings)?;
    if let Some(p) = &a.aux {
        m.input("aux", p)?;
    }
    m.output("embeddings", &a.out)?;
    m.output("report", &report_path)?;
    m.write(&manifest_path(&a.manifest, &a.out))
}

#[derive(Serialize)]
struct EvalConfig {
    format: CorpusFormat,
    histogram: bool,
    tokenizers: Vec<String>,
    corpora: Vec<String>,
}

fn unique_names<'a>(names: impl Iterator<Item = &'a String>, flag: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(usage(format!("{flag} name {n:?} given twice")));
        }
    }
    Ok(())
}

pub fn eval_compression(a: EvalCompressionArgs) -> Result<()> {
    let tok_specs: Vec<(String, PathBuf)> = a
        .tokenizers
        .iter()
        .map(|s| match s.split_once('=') {
            Some((n, p)) if !n.is_empty() && !p.is_empty() => (n.to_owned(), PathBuf::from(p)),
            _ => {
                let p = PathBuf::from(s);
                let name =
                    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| s.clone());
                (name, p)
            }
        })
        .collect();
    let corpus_specs = a.corpora.iter().map(|s| parse_pair(s, "--corpus")).collect::<Result<Vec<_>>>()?;
    unique_names(tok_specs.iter().map(|t| &t.0), "--tokenizer")?;
    unique_names(corpus_specs.iter().map(|c| &c.0), "--corpus")?;

    let toks = tok_specs.iter().map(|(n, p)| Ok((n.clone(), load_tok(p)?))).collect::<Result<Vec<_>>>()?;
    let corpora = corpus_specs
        .iter()
        .map(|(n, p)| Ok((n.clone(), load_docs(Path::new(p), a.format)?)))
        .collect::<Result<Vec<_>>>()?;
    let tok_refs: Vec<(String, &BpeTokenizer)> = toks.iter().map(|(n, t)| (n.clone(), t)).collect();

    let table = compare_tokenizers(&tok_refs, &corpora)?;
    print!("{}", table.render_text());
    if a.histogram {
        for (tname, tok) in &toks {
            for (cname, docs) in &corpora {
                let types = word_count_histogram(tok, docs);
                let occ = word_count_histogram_weighted(tok, docs);
                println!();
                println!("words per token: {tname} on {cname}");
                println!("{:>5}  {:>10}  {:>12}", "words", "types", "occurrences");
                for (words, n) in &occ.bins {
                    let t = types.bins.get(words).copied().unwrap_or(0);
                    println!("{words:>5}  {t:>10}  {n:>12}");
                }
            }
        }
    }
    if let Some(p) = &a.csv {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        table.write_csv(std::io::BufWriter::new(f))?;
    }

    let mut m = RunManifest::new(
        "eval-compression",
        0,
        EvalConfig {
            format: a.format,
            histogram: a.histogram,
            tokenizers: tok_specs.iter().map(|t| t.0.clone()).collect(),
            corpora: corpus_specs.iter().map(|c| c.0.clone()).collect(),
        },
    )?;
    for (n, p) in &tok_specs {
        m.input(&format!("tokenizer:{n}"), p)?;
    }
    for (n, p) in &corpus_specs {
        m.input(&format!("corpus:{n}"), Path::new(p))?;
    }
    if let Some(csv) = &a.csv {
        m.output("csv", csv)?;
    }
    let path = match (&a.manifest, &a.csv) {
        (Some(p), _) => p.clone(),
        (None, Some(csv)) => manifest::default_path(csv),
        (None, None) => PathBuf::from("eval-compression.manifest.json"),
    };
    m.write(&path)
}

#[derive(Serialize)]
struct PseudoAuxConfig {
    dim: usize,
}

pub fn pseudo_aux(a: PseudoAuxArgs) -> Result<()> {
    if a.dim == 0 {
        return Err(usage("--dim must be positive"));
    }
    let embedder = PseudoEmbedder::new(a.dim, a.seed);
    let mut store = AuxEmbeddingStore::new(a.dim)?;
    for p in &a.tokenizers {
        let tok = load_tok(p)?;
        for i in 0..tok.vocab_size() {
            let text = tok.token_text(TokenId::from(i))?;
            if store.get(&text).is_none() {
                store.insert(text.clone(), &embedder.embed(&text))?;
            }
        }
    }
    save_store(&store, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    log::info!("wrote {} auxiliary vectors to {}", store.len(), a.out.display());

    let mut m = RunManifest::new("pseudo-aux", a.seed, PseudoAuxConfig { dim: a.dim })?;
    for p in &a.tokenizers {
        m.input("tokenizer", p)?;
    }
    m.output("aux", &a.out)?;
    m.write(&manifest_path(&a.manifest, &a.out))
}
