use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bbpe_core::analysis::{frequency_profile_with, write_diff_csv};
use bbpe_core::corpus::{balanced_stream, read_lines};
use bbpe_core::trainer::{read_merges, train_lines, write_merges};
use bbpe_core::vocab::load_any;
use bbpe_core::{
    finalize, tokenization_compare, vocab_diff, AnyTokenizer, Config, Error, ScriptMap,
    Segmentation, TokenRegistry, Tokenizer, TokenizerOptions, VocabSource, Vocabulary,
};
use thiserror::Error;

use crate::{
    AnalyzeArgs, Cli, Command, CompareArgs, DetokenizeArgs, DiffArgs, TokenizeArgs, TrainArgs,
};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Line { .. } => EXIT_DATA,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn data<E: Into<Error>>(e: E) -> CliError {
    CliError::Data(e.into())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Train(args) => train(args),
        Command::Tokenize(args) => tokenize(args),
        Command::Detokenize(args) => detokenize(args),
        Command::AnalyzeFreq(args) => analyze_freq(args),
        Command::VocabDiff(args) => diff(args),
        Command::Compare(args) => compare(args),
    })
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let mut config = match path {
        Some(p) => Config::load(p).map_err(data)?,
        None => Config::default(),
    };
    config.apply_env(std::env::vars());
    Ok(config)
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Data(Error::Io(io::Error::new(
                e.kind(),
                format!("{}: {e}", p.display()),
            )))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(v) = args.vocab_size {
        config.set("vocab_size", v.to_string());
    }
    if let Some(v) = args.min_freq {
        config.set("min_pair_frequency", v.to_string());
    }
    if let Some(v) = args.max_token_bytes {
        config.set("max_token_bytes", v.to_string());
    }
    if args.wwb {
        config.set("distinguish_leading", "false");
    }
    if let Some(v) = args.seed {
        config.set("seed", v.to_string());
    }
    if let Some(v) = args.alpha {
        config.set("alpha", v.to_string());
    }
    let cfg = config.trainer_config().map_err(data)?;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = config
        .corpus_spec()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if spec.languages.is_empty() && args.inputs.is_empty() {
        return Err(CliError::Usage(
            "no corpus: pass --input or set corpus.<lang> in the config".into(),
        ));
    }

    let mut lines = if spec.languages.is_empty() {
        Vec::new()
    } else {
        balanced_stream(&spec).map_err(data)?
    };
    for path in &args.inputs {
        lines.extend(read_lines(path).map_err(data)?);
    }
    log::info!("training on {} lines", lines.len());

    let raw = train_lines(&lines, &cfg).map_err(data)?;
    let vocab = finalize(&raw, &cfg).map_err(data)?;
    vocab.save(&args.out).map_err(data)?;
    if let Some(path) = &args.merges {
        let mut out = output(Some(path))?;
        write_merges(&mut out, &raw.merges)?;
        out.flush()?;
    }
    eprintln!(
        "wrote {} tokens ({} merges) to {}",
        vocab.len(),
        raw.merges.len(),
        args.out.display()
    );
    Ok(())
}

fn load_bbpe(path: &Path) -> Result<Vocabulary> {
    let vocab = Vocabulary::load(path).map_err(data)?;
    Ok(vocab)
}

fn for_each_stdin_line(mut f: impl FnMut(usize, &str, &mut dyn Write) -> Result<()>) -> Result<()> {
    let stdin = io::stdin().lock();
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in BufReader::new(stdin).lines().enumerate() {
        let line = line.map_err(|e| CliError::Line {
            line: i + 1,
            source: e.into(),
        })?;
        f(i + 1, &line, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn tokenize(args: TokenizeArgs) -> Result<()> {
    let vocab = load_bbpe(&args.vocab)?;
    let options = TokenizerOptions {
        wbl_mode: args.wbl,
        segmentation: if args.merge_replay {
            Segmentation::MergeReplay
        } else {
            Segmentation::GreedyLongestMatch
        },
    };
    let tokenizer = match &args.merges {
        Some(path) if args.merge_replay => {
            let merges = read_merges(BufReader::new(File::open(path)?)).map_err(data)?;
            Tokenizer::with_merges(vocab, &merges, options)
        }
        _ => Tokenizer::new(vocab, options),
    }
    .map_err(data)?;
    for_each_stdin_line(|_, line, out| {
        let text = if args.ids {
            tokenizer.encode_line(line)
        } else {
            tokenizer.tokenize_line(line)
        };
        writeln!(out, "{text}")?;
        Ok(())
    })
}

fn detokenize(args: DetokenizeArgs) -> Result<()> {
    let vocab = args.vocab.as_deref().map(load_bbpe).transpose()?;
    let registry = vocab
        .as_ref()
        .map(|v| v.meta().registry())
        .unwrap_or_default();
    for_each_stdin_line(|lineno, line, out| {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let text = if args.ids {
            let vocab = vocab.as_ref().expect("clap requires --vocab with --ids");
            let mut tokens = Vec::with_capacity(fields.len());
            for f in fields {
                let token = f
                    .parse::<u32>()
                    .ok()
                    .and_then(|id| vocab.rendered_token(id))
                    .ok_or_else(|| CliError::Line {
                        line: lineno,
                        source: Error::Detokenize(bbpe_core::DetokenizeError::UnknownId(
                            f.parse().unwrap_or(u32::MAX),
                        )),
                    })?;
                tokens.push(token);
            }
            decode(&tokens, &registry, lineno)?
        } else {
            decode(&fields, &registry, lineno)?
        };
        writeln!(out, "{text}")?;
        Ok(())
    })
}

fn decode(tokens: &[&str], registry: &TokenRegistry, line: usize) -> Result<String> {
    bbpe_core::detokenize(tokens, registry).map_err(|e| CliError::Line {
        line,
        source: e.into(),
    })
}

fn read_corpus(paths: &[PathBuf]) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for p in paths {
        lines.extend(read_lines(p).map_err(data)?);
    }
    Ok(lines)
}

fn analyze_freq(args: AnalyzeArgs) -> Result<()> {
    let vocab = load_any(&args.vocab).map_err(data)?;
    let lines = read_corpus(&args.corpus)?;
    let tokenizer = AnyTokenizer::for_vocab(vocab).map_err(data)?;
    let profile = frequency_profile_with(&tokenizer, &lines);

    let mut out = output(args.out.as_ref())?;
    profile.write_csv(&mut out).map_err(data)?;
    out.flush()?;
    if let Some(path) = &args.svg {
        let mut svg = output(Some(path))?;
        let title = format!("Token frequencies: {}", args.vocab.display());
        profile.write_svg(&mut svg, &title)?;
        svg.flush()?;
    }
    let learned = profile.learned_only();
    for t in &args.thresholds {
        eprintln!(
            "below {t}: {:.4} of tokens, {:.4} of learned tokens",
            profile.fraction_below(*t),
            learned.fraction_below(*t)
        );
    }
    Ok(())
}

fn diff(args: DiffArgs) -> Result<()> {
    let map = match &args.config {
        Some(_) => load_config(args.config.as_deref())?.script_map(),
        None => ScriptMap::new(),
    };
    let a = load_any(&args.a).map_err(data)?;
    let b = load_any(&args.b).map_err(data)?;
    let rows = vocab_diff(&a, &b, &map);
    let mut out = output(args.out.as_ref())?;
    write_diff_csv(&mut out, &rows).map_err(data)?;
    out.flush()?;
    Ok(())
}

fn label(path: &Path, vocab: &Vocabulary) -> String {
    let kind = match vocab.source() {
        VocabSource::Bbpe => "bbpe",
        VocabSource::ExternalText => "text",
    };
    format!("{} ({kind}, {} tokens)", path.display(), vocab.len())
}

fn compare(args: CompareArgs) -> Result<()> {
    let a = AnyTokenizer::for_vocab(load_any(&args.a).map_err(data)?).map_err(data)?;
    let b = AnyTokenizer::for_vocab(load_any(&args.b).map_err(data)?).map_err(data)?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "A: {}", label(&args.a, a.vocab()))?;
    writeln!(out, "B: {}", label(&args.b, b.vocab()))?;
    let show = |text: &str, out: &mut dyn Write| -> Result<()> {
        let c = tokenization_compare(text, &a, &b);
        writeln!(out, "text: {text}")?;
        writeln!(out, "A [{}]: {}", c.count_a, c.tokens_a.join(" "))?;
        writeln!(out, "B [{}]: {}", c.count_b, c.tokens_b.join(" "))?;
        Ok(())
    };
    if args.text.is_empty() {
        drop(out);
        for_each_stdin_line(|_, line, out| show(line, out))
    } else {
        for t in &args.text {
            show(t, &mut out)?;
        }
        out.flush()?;
        Ok(())
    }
}
