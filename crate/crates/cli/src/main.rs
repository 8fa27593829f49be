mod commands;
mod exit;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use tokengraft::config::LengthUnit;
use tokengraft::corpus::CorpusFormat;
use tokengraft::supertoken::ChunkUnit;
use tokengraft::transplant::Method;

/// Tokenizer training, embedding transplantation and compression benchmarks.
///
/// Set TOKENGRAFT_THREADS to bound the worker pool; outputs do not depend on it.
#[derive(Debug, Parser)]
#[command(name = "tokengraft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a word-bounded byte-level BPE tokenizer.
    TrainBpe(TrainBpeArgs),
    /// Train a supertoken tokenizer whose merges may cross word boundaries.
    TrainSupertokenizer(TrainSupertokenizerArgs),
    /// Initialize embeddings for a new tokenizer from an existing model.
    Transplant(TransplantArgs),
    /// Compare tokenizers by total tokens and bytes per token.
    EvalCompression(EvalCompressionArgs),
    /// Write deterministic placeholder auxiliary embeddings for a tokenizer's tokens.
    PseudoAux(PseudoAuxArgs),
}

#[derive(Debug, Args)]
struct CommonTrainArgs {
    /// Training corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "lines")]
    format: CorpusFormat,
    /// Target vocabulary size, including specials and the 256 byte tokens.
    #[arg(long)]
    vocab_size: usize,
    /// Special token, matched verbatim (repeatable).
    #[arg(long = "special")]
    specials: Vec<String>,
    /// Output tokenizer JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Manifest path [default: <out>.manifest.json].
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainBpeArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
}

#[derive(Debug, Args)]
struct TrainSupertokenizerArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
    /// Chunk length distribution as len:prob pairs.
    #[arg(long, default_value = "1:0.4,2:0.3,3:0.2,4:0.1")]
    chunk_dist: String,
    /// Separator code point in hex, e.g. E000.
    #[arg(long, default_value = "E000")]
    separator: String,
    #[arg(long, default_value = "words", value_parser = parse_chunk_unit)]
    chunk_unit: ChunkUnit,
}

#[derive(Debug, Args)]
struct TransplantArgs {
    #[arg(long)]
    old_tokenizer: PathBuf,
    #[arg(long)]
    new_tokenizer: PathBuf,
    /// Tensor file with embed.input (and embed.output when untied).
    #[arg(long)]
    embeddings: PathBuf,
    /// Transplant embed.output as well as embed.input.
    #[arg(long)]
    untied: bool,
    /// AUXV1 auxiliary embedding file (required by tokenadapt).
    #[arg(long)]
    aux: Option<PathBuf>,
    #[arg(long, default_value = "tokenadapt")]
    method: Method,
    /// Weight of the global estimate in the hybrid.
    #[arg(long, default_value_t = 0.3)]
    w_glob: f64,
    #[arg(long, default_value_t = 0.6)]
    temperature: f64,
    /// Neighbors retrieved for the global estimate.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Drop neighbors with cosine similarity below this value.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How token lengths are measured for the local length score.
    #[arg(long, default_value = "chars", value_parser = parse_length_unit)]
    length_unit: LengthUnit,
    /// Copy an old row for a new special token, as NEW=OLD (repeatable).
    #[arg(long = "map-special")]
    map_special: Vec<String>,
    /// Output tensor file.
    #[arg(long)]
    out: PathBuf,
    /// Report path [default: <out>.report.json].
    #[arg(long)]
    report: Option<PathBuf>,
    /// Manifest path [default: <out>.manifest.json].
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalCompressionArgs {
    /// Tokenizer JSON, optionally NAME=PATH (repeatable).
    #[arg(long = "tokenizer", required = true)]
    tokenizers: Vec<String>,
    /// Evaluation corpus as NAME=PATH (repeatable).
    #[arg(long = "corpus", required = true)]
    corpora: Vec<String>,
    #[arg(long, default_value = "lines")]
    format: CorpusFormat,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print words-per-token histograms of the vocabulary types used.
    #[arg(long)]
    histogram: bool,
    /// Manifest path [default: <csv>.manifest.json, or eval-compression.manifest.json].
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PseudoAuxArgs {
    /// Tokenizer whose decoded tokens become keys (repeatable).
    #[arg(long = "tokenizer", required = true)]
    tokenizers: Vec<PathBuf>,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Manifest path [default: <out>.manifest.json].
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn parse_chunk_unit(s: &str) -> Result<ChunkUnit, String> {
    match s {
        "words" => Ok(ChunkUnit::Words),
        "chars" => Ok(ChunkUnit::Chars),
        other => Err(format!("unknown chunk unit {other:?} (expected words or chars)")),
    }
}

fn parse_length_unit(s: &str) -> Result<LengthUnit, String> {
    match s {
        "chars" => Ok(LengthUnit::Chars),
        "bytes" => Ok(LengthUnit::Bytes),
        other => Err(format!("unknown length unit {other:?} (expected chars or bytes)")),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("TOKENGRAFT_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            exit::usage(format!("TOKENGRAFT_THREADS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow::anyhow!("configuring worker pool: {e}"))?;
    log::debug!("using {n} worker threads");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::TrainBpe(a) => commands::train_bpe(a),
        Command::TrainSupertokenizer(a) => commands::train_supertokenizer(a),
        Command::Transplant(a) => commands::transplant(a),
        Command::EvalCompression(a) => commands::eval_compression(a),
        Command::PseudoAux(a) => commands::pseudo_aux(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e))
        }
    }
}
