mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Byte-level BPE vocabulary toolkit.
#[derive(Debug, Parser)]
#[command(name = "bbpe", version, about)]
pub struct Cli {
    /// Worker threads for corpus scans; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a vocabulary from a corpus.
    Train(TrainArgs),
    /// Tokenize stdin line by line.
    Tokenize(TokenizeArgs),
    /// Turn token lines from stdin back into text.
    Detokenize(DetokenizeArgs),
    /// Token frequencies of a vocabulary over a corpus, as CSV.
    AnalyzeFreq(AnalyzeArgs),
    /// Per-script token counts of two vocabularies and their relative difference.
    VocabDiff(DiffArgs),
    /// Tokenize the same text with two vocabularies side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Key-value config file (corpus.<lang> = paths, vocab_size, ...).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra plain-text corpus files, used without upsampling.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub min_freq: Option<u64>,
    #[arg(long)]
    pub max_token_bytes: Option<usize>,
    /// Train without the leading/trailing distinction.
    #[arg(long)]
    pub wwb: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Vocabulary output; metadata goes to <out>.meta.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional merges output (RANK, LEFT, RIGHT, COUNT; tab-separated).
    #[arg(long)]
    pub merges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    #[arg(long)]
    pub vocab: PathBuf,
    /// Print token ids instead of rendered tokens.
    #[arg(long)]
    pub ids: bool,
    /// Add `##` to continuation tokens of a WWB vocabulary.
    #[arg(long)]
    pub wbl: bool,
    /// Replay merges in rank order instead of greedy longest match.
    #[arg(long, requires = "merges")]
    pub merge_replay: bool,
    #[arg(long)]
    pub merges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetokenizeArgs {
    /// Needed for --ids; otherwise supplies specials and sentence stops.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Input lines hold token ids.
    #[arg(long, requires = "vocab")]
    pub ids: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub vocab: PathBuf,
    /// Corpus files, one document per line.
    #[arg(long = "corpus", required = true)]
    pub corpus: Vec<PathBuf>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional rank/frequency chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Report the share of tokens below these counts on stderr.
    #[arg(long = "threshold", default_values_t = [1u64, 100])]
    pub thresholds: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Config file with script.<Script> = label entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Text to compare; stdin lines when omitted.
    #[arg(long)]
    pub text: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bbpe: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
