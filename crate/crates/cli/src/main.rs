mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Claim span identification: preprocessing, training, evaluation,
/// prediction and retrieval experiments.
#[derive(Debug, Parser)]
#[command(name = "claimspan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize, tokenize and BIO-encode a corpus and report its statistics.
    Preprocess(PreprocessArgs),
    /// Train a tagger; writes the epoch log to stdout as JSON lines.
    Train(TrainArgs),
    /// Score a checkpoint on an annotated corpus.
    Eval(EvalArgs),
    /// Add predicted spans to every post of a corpus.
    Predict(PredictArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Train one model per adapter position and compare them.
    LayerSweep(LayerSweepArgs),
    /// Compare BM25 retrieval with tweet queries against span queries.
    RetrieveEval(RetrieveEvalArgs),
    /// Write the seeded synthetic corpus, bank and retrieval fixture.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// Corpus of annotated posts (JSON lines).
    #[arg(long)]
    input: PathBuf,
    /// Where to write the processed posts (JSON lines).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print a table instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides both the model and the training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training corpus (JSON lines).
    #[arg(long)]
    input: PathBuf,
    /// Validation corpus; without it the tail of the input is held out.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    output: PathBuf,
    /// Description bank, one description per line (built-in bank if absent).
    #[arg(long)]
    bank: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Print a table instead of JSON lines.
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Annotated corpus (JSON lines).
    #[arg(long)]
    input: PathBuf,
    /// Where to write the JSON report (stdout if absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print a results table instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus (JSON lines); existing spans are kept.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the corpus with predicted spans (stdout if absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print each post with its predicted spans bracketed.
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Where to write the JSON report (stdout if absent).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct LayerSweepArgs {
    /// Annotated corpus, split 80/10/10 into train, validation and test.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Adapter positions (1-based, comma separated); every block if absent.
    #[arg(long, value_delimiter = ',')]
    layers: Vec<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct RetrieveEvalArgs {
    /// Annotated posts used as queries (JSON lines).
    #[arg(long)]
    input: PathBuf,
    /// Document collection (JSON lines of {"id", "text"}).
    #[arg(long)]
    corpus: PathBuf,
    /// Relevance judgments (JSON lines of {"query_id", "relevant"}).
    #[arg(long)]
    judgments: PathBuf,
    /// Cutoffs, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [3, 5])]
    k: Vec<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of annotated posts.
    #[arg(long, default_value_t = 500)]
    posts: usize,
    /// Number of retrieval queries.
    #[arg(long, default_value_t = 40)]
    queries: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
