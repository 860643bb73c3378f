//! Byte-level BPE (BBPE) vocabulary toolkit.
//!
//! Text is split into words (every CJK character and punctuation mark is a
//! word of its own), words are converted to UTF-8 bytes, and BPE merges are
//! learned over those bytes without crossing word boundaries. The finished
//! vocabulary always contains every single byte in both the word-initial
//! ("leading") and word-internal ("trailing", rendered with `##`) position,
//! so tokenization is total and lossless.
//!
//! ```
//! use bbpe_core::{preprocess, train, finalize, Tokenizer, TokenizerOptions, TrainerConfig};
//!
//! let cfg = TrainerConfig { vocab_size: 600, ..Default::default() };
//! let corpus = [preprocess("low lower lowest low")];
//! let vocab = finalize(&train(&corpus, &cfg).unwrap(), &cfg).unwrap();
//! let tok = Tokenizer::new(vocab, TokenizerOptions::default()).unwrap();
//! let tokens = tok.tokenize("lowest");
//! assert_eq!(tok.detokenize(&tokens).unwrap(), "lowest");
//! ```

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod preprocess;
pub mod token;
pub mod tokenizer;
pub mod trainer;
pub mod vocab;

use thiserror::Error;

pub use analysis::{
    classify_token_language, frequency_profile, tokenization_compare, vocab_diff,
    vocab_language_histogram, AnyTokenizer, Comparison, DiffRow, FrequencyProfile,
    LanguageHistogram, ScriptMap,
};
pub use config::{Config, ConfigError};
pub use corpus::{measure, stream, upsample_plan, CorpusError, CorpusSpec, LanguageSource};
pub use preprocess::{
    classify_char, normalize, preprocess, to_byte_words, CharClass, PreprocessConfig,
    PreprocessedText, Preprocessor, Segment, Word,
};
pub use token::{
    parse_token, render_token, ByteToken, Position, RenderedToken, TokenError, TokenKind,
    TokenRegistry,
};
pub use tokenizer::{
    detokenize, DetokenizeError, Segmentation, Tokenizer, TokenizerError, TokenizerOptions,
};
pub use trainer::{
    apply_merge, count_words, pair_counts, select_pair, train, train_lines, MergeRule, TrainError,
    TrainOutput, TrainerConfig, WordTable,
};
pub use vocab::{
    finalize, load_external_text_vocab, VocabError, VocabMeta, VocabSource, Vocabulary,
};

/// Any error the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Detokenize(#[from] DetokenizeError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Merges(#[from] trainer::MergesFileError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
