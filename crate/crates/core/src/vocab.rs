//! Finalized vocabularies and their on-disk format.
//!
//! A vocab file holds one rendered token per line (LF endings, final newline,
//! no blank lines); the line index is the token id. Build settings needed to
//! tokenize with the vocabulary live next to it in `<path>.meta`, one
//! `#! key = value` line each.
//!
//! Byte-level vocabularies are ordered: specials, the 256 leading
//! fallbacks `00`..`FF`, the 256 trailing fallbacks `##00`..`##FF`, atomic
//! sentence stops, then learned tokens by merge rank.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::preprocess::{PreprocessConfig, Preprocessor};
use crate::token::{
    parse_token, ByteToken, Position, TokenKind, TokenRegistry, DEFAULT_SPECIALS, TRAILING_PREFIX,
};
use crate::trainer::{TrainOutput, TrainerConfig};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("duplicate token {token:?} on line {line}")]
    DuplicateToken { line: usize, token: String },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("vocabulary needs {needed} entries but vocab_size is {limit}")]
    VocabOverflow { needed: usize, limit: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabSource {
    Bbpe,
    ExternalText,
}

impl VocabSource {
    fn as_str(self) -> &'static str {
        match self {
            VocabSource::Bbpe => "bbpe",
            VocabSource::ExternalText => "external_text",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabMeta {
    pub source: VocabSource,
    pub distinguish_leading: bool,
    pub specials: Vec<String>,
    pub preprocess: PreprocessConfig,
}

impl Default for VocabMeta {
    fn default() -> Self {
        VocabMeta {
            source: VocabSource::Bbpe,
            distinguish_leading: true,
            specials: DEFAULT_SPECIALS.iter().map(|s| s.to_string()).collect(),
            preprocess: PreprocessConfig::default(),
        }
    }
}

impl VocabMeta {
    pub fn registry(&self) -> TokenRegistry {
        TokenRegistry::new(
            self.specials.iter().cloned(),
            self.preprocess.sentence_stops.iter().copied(),
        )
    }

    pub fn to_text(&self) -> String {
        let p = &self.preprocess;
        let stops: Vec<String> = p.sentence_stops.iter().map(|c| c.to_string()).collect();
        let ranges: Vec<String> = p
            .cjk_ranges
            .iter()
            .map(|r| format!("{:04X}-{:04X}", r.start(), r.end()))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "#! source = {}", self.source.as_str());
        let _ = writeln!(out, "#! distinguish_leading = {}", self.distinguish_leading);
        let _ = writeln!(out, "#! specials = {}", self.specials.join(" "));
        let _ = writeln!(out, "#! sentence_stops = {}", stops.join(" "));
        let _ = writeln!(out, "#! cjk_ranges = {}", ranges.join(" "));
        let _ = writeln!(out, "#! nfc = {}", p.nfc);
        let _ = writeln!(
            out,
            "#! symbols_as_punctuation = {}",
            p.symbols_as_punctuation
        );
        out
    }

    pub fn parse(text: &str) -> Result<VocabMeta, VocabError> {
        let mut meta = VocabMeta::default();
        for (i, line) in text.lines().enumerate() {
            let malformed = |reason: String| VocabError::MalformedLine {
                line: i + 1,
                reason,
            };
            if line.trim().is_empty() {
                continue;
            }
            let body = line
                .strip_prefix("#!")
                .ok_or_else(|| malformed("metadata lines start with #!".into()))?;
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| malformed("expected key = value".into()))?;
            let value = value.trim();
            let words = || value.split_whitespace();
            let parse_bool = |v: &str| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(malformed(format!("not a boolean: {other:?}"))),
            };
            match key.trim() {
                "source" => {
                    meta.source = match value {
                        "bbpe" => VocabSource::Bbpe,
                        "external_text" => VocabSource::ExternalText,
                        other => return Err(malformed(format!("unknown source {other:?}"))),
                    }
                }
                "distinguish_leading" => meta.distinguish_leading = parse_bool(value)?,
                "specials" => meta.specials = words().map(str::to_string).collect(),
                "sentence_stops" => {
                    meta.preprocess.sentence_stops = words()
                        .map(|w| {
                            let mut cs = w.chars();
                            match (cs.next(), cs.next()) {
                                (Some(c), None) => Ok(c),
                                _ => Err(malformed(format!(
                                    "sentence stop {w:?} is not one character"
                                ))),
                            }
                        })
                        .collect::<Result<_, _>>()?
                }
                "cjk_ranges" => {
                    meta.preprocess.cjk_ranges = words()
                        .map(|w| {
                            parse_hex_range(w).ok_or_else(|| malformed(format!("bad range {w:?}")))
                        })
                        .collect::<Result<_, _>>()?
                }
                "nfc" => meta.preprocess.nfc = parse_bool(value)?,
                "symbols_as_punctuation" => {
                    meta.preprocess.symbols_as_punctuation = parse_bool(value)?
                }
                other => return Err(malformed(format!("unknown key {other:?}"))),
            }
        }
        Ok(meta)
    }
}

/// Parses `4E00-9FFF` (or a single code point `3000`).
pub fn parse_hex_range(text: &str) -> Option<RangeInclusive<u32>> {
    let (lo, hi) = text.split_once('-').unwrap_or((text, text));
    let lo = u32::from_str_radix(lo.trim(), 16).ok()?;
    let hi = u32::from_str_radix(hi.trim(), 16).ok()?;
    (lo <= hi).then_some(lo..=hi)
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// A text token of a foreign (WordPiece-style) vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextEntry<'a> {
    Special(&'a str),
    Piece { text: &'a str, trailing: bool },
}

fn is_bracketed_special(line: &str) -> bool {
    line.len() > 2 && line.starts_with('[') && line.ends_with(']')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    /// Parsed entries; empty for external text vocabularies.
    parsed: Vec<ByteToken>,
    index: HashMap<String, u32>,
    meta: VocabMeta,
}

impl Vocabulary {
    /// Builds a vocabulary from rendered lines. Byte-level sources must parse
    /// under the registry described by `meta`.
    pub fn from_rendered<I, S>(lines: I, meta: VocabMeta) -> Result<Vocabulary, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let registry = meta.registry();
        let mut tokens = Vec::new();
        let mut parsed = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in lines.into_iter().enumerate() {
            let line: String = line.into();
            let lineno = i + 1;
            if line.is_empty() {
                return Err(VocabError::MalformedLine {
                    line: lineno,
                    reason: "empty line".into(),
                });
            }
            if line.contains(['\r', '\n']) {
                return Err(VocabError::MalformedLine {
                    line: lineno,
                    reason: "line breaks other than LF".into(),
                });
            }
            if meta.source == VocabSource::Bbpe {
                let token =
                    parse_token(&line, &registry).map_err(|e| VocabError::MalformedLine {
                        line: lineno,
                        reason: e.to_string(),
                    })?;
                parsed.push(token);
            }
            if index.insert(line.clone(), i as u32).is_some() {
                return Err(VocabError::DuplicateToken {
                    line: lineno,
                    token: line,
                });
            }
            tokens.push(line);
        }
        Ok(Vocabulary {
            tokens,
            parsed,
            index,
            meta,
        })
    }

    pub fn from_tokens(tokens: Vec<ByteToken>, meta: VocabMeta) -> Result<Vocabulary, VocabError> {
        let rendered: Vec<String> = tokens.iter().map(|t| t.render().into_string()).collect();
        Vocabulary::from_rendered(rendered, meta)
    }

    /// Specials, fallbacks and sentence stops; no learned tokens.
    pub fn fallback_only(cfg: &TrainerConfig) -> Vocabulary {
        let empty = TrainOutput {
            merges: Vec::new(),
            learned: Vec::new(),
            final_counts: Default::default(),
            distinguish_leading: cfg.distinguish_leading,
            warnings: Vec::new(),
        };
        let unbounded = TrainerConfig {
            vocab_size: usize::MAX,
            ..cfg.clone()
        };
        finalize(&empty, &unbounded).expect("base entries are distinct")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn meta(&self) -> &VocabMeta {
        &self.meta
    }

    pub fn source(&self) -> VocabSource {
        self.meta.source
    }

    pub fn rendered(&self) -> &[String] {
        &self.tokens
    }

    pub fn rendered_token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id_of(&self, rendered: &str) -> Option<u32> {
        self.index.get(rendered).copied()
    }

    pub fn id_of_token(&self, token: &ByteToken) -> Option<u32> {
        self.id_of(token.render().as_str())
    }

    /// Parsed entry; `None` for external vocabularies or out-of-range ids.
    pub fn token(&self, id: u32) -> Option<&ByteToken> {
        self.parsed.get(id as usize)
    }

    pub fn byte_tokens(&self) -> &[ByteToken] {
        &self.parsed
    }

    pub fn is_special(&self, id: u32) -> bool {
        match self.meta.source {
            VocabSource::Bbpe => matches!(self.token(id), Some(ByteToken::Special(_))),
            VocabSource::ExternalText => {
                matches!(self.text_entry(id), Some(TextEntry::Special(_)))
            }
        }
    }

    pub fn text_entry(&self, id: u32) -> Option<TextEntry<'_>> {
        let line = self.rendered_token(id)?;
        if self.meta.specials.iter().any(|s| s == line) || is_bracketed_special(line) {
            return Some(TextEntry::Special(line));
        }
        Some(match line.strip_prefix(TRAILING_PREFIX) {
            Some(rest) if !rest.is_empty() => TextEntry::Piece {
                text: rest,
                trailing: true,
            },
            _ => TextEntry::Piece {
                text: line,
                trailing: false,
            },
        })
    }

    /// UTF-8 content of an entry with decoration removed; `None` for specials.
    pub fn content_bytes(&self, id: u32) -> Option<Vec<u8>> {
        match self.meta.source {
            VocabSource::Bbpe => match self.token(id)? {
                ByteToken::Bytes { bytes, .. } => Some(bytes.clone()),
                ByteToken::SentenceStop(c) => Some(c.to_string().into_bytes()),
                ByteToken::Special(_) => None,
            },
            VocabSource::ExternalText => match self.text_entry(id)? {
                TextEntry::Special(_) => None,
                TextEntry::Piece { text, .. } => Some(text.as_bytes().to_vec()),
            },
        }
    }

    /// Number of single-octet tokens per position.
    pub fn single_byte_counts(&self) -> (usize, usize) {
        let mut leading = 0;
        let mut trailing = 0;
        for t in &self.parsed {
            if t.kind() == TokenKind::Fallback {
                match t.position() {
                    Some(Position::Leading) => leading += 1,
                    Some(Position::Trailing) => trailing += 1,
                    None => {}
                }
            }
        }
        (leading, trailing)
    }

    /// The file body: one token per line, LF terminated.
    pub fn to_file_text(&self) -> String {
        let mut out = String::with_capacity(self.tokens.iter().map(|t| t.len() + 1).sum());
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        write_file(path, self.to_file_text().as_bytes())?;
        write_file(&meta_path(path), self.meta.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, VocabError> {
        let sidecar = meta_path(path);
        let meta = if sidecar.exists() {
            VocabMeta::parse(&read_file(&sidecar)?)?
        } else {
            VocabMeta::default()
        };
        let text = read_file(path)?;
        let mut meta = meta;
        if meta.source == VocabSource::Bbpe && !sidecar.exists() {
            meta.distinguish_leading = text.lines().any(|l| l.starts_with(TRAILING_PREFIX));
        }
        Vocabulary::from_rendered(split_lines(&text), meta)
    }
}

fn split_lines(text: &str) -> Vec<&str> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Vec::new();
    }
    body.split('\n').collect()
}

fn read_file(path: &Path) -> Result<String, VocabError> {
    fs::read_to_string(path).map_err(|source| VocabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), VocabError> {
    fs::write(path, data).map_err(|source| VocabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a foreign vocabulary of plain text tokens (`##` marks word
/// continuations). Such vocabularies serve analysis only.
pub fn load_external_text_vocab(path: &Path) -> Result<Vocabulary, VocabError> {
    let text = read_file(path)?;
    let lines = split_lines(&text);
    let specials = lines
        .iter()
        .filter(|l| is_bracketed_special(l))
        .map(|l| l.to_string())
        .collect();
    let meta = VocabMeta {
        source: VocabSource::ExternalText,
        distinguish_leading: true,
        specials,
        preprocess: PreprocessConfig::default(),
    };
    Vocabulary::from_rendered(lines, meta)
}

/// Loads either kind of vocabulary. A file is byte-level when it has a
/// sidecar or every line parses as a byte-level token.
pub fn load_any(path: &Path) -> Result<Vocabulary, VocabError> {
    if meta_path(path).exists() {
        return Vocabulary::load(path);
    }
    match Vocabulary::load(path) {
        Ok(v) => Ok(v),
        Err(VocabError::MalformedLine { .. }) => load_external_text_vocab(path),
        Err(e) => Err(e),
    }
}

/// Assembles the final vocabulary from trainer output.
pub fn finalize(raw: &TrainOutput, cfg: &TrainerConfig) -> Result<Vocabulary, VocabError> {
    let mut tokens: Vec<ByteToken> = cfg
        .specials
        .iter()
        .map(|s| ByteToken::Special(s.clone()))
        .collect();
    let positions: &[Position] = if cfg.distinguish_leading {
        &[Position::Leading, Position::Trailing]
    } else {
        &[Position::Leading]
    };
    for &position in positions {
        tokens.extend((0..=255u8).map(|b| ByteToken::new([b], position)));
    }
    tokens.extend(
        Preprocessor::new(cfg.preprocess.clone())
            .atomic_sentence_stops()
            .into_iter()
            .map(ByteToken::SentenceStop),
    );
    tokens.extend(
        raw.learned
            .iter()
            .filter(|t| t.kind() == TokenKind::Learned)
            .cloned(),
    );
    if tokens.len() > cfg.vocab_size {
        return Err(VocabError::VocabOverflow {
            needed: tokens.len(),
            limit: cfg.vocab_size,
        });
    }
    let meta = VocabMeta {
        source: VocabSource::Bbpe,
        distinguish_leading: cfg.distinguish_leading,
        specials: cfg.specials.clone(),
        preprocess: cfg.preprocess.clone(),
    };
    Vocabulary::from_tokens(tokens, meta)
}
