//! Byte-level tokens and their canonical text rendering.
//!
//! A byte token renders as uppercase hex pairs of its octets, prefixed with
//! `##` when it continues a word (`E8`, `##A9`, `E8A992`). Special tokens such
//! as `[CLS]` and atomic sentence stops such as `。` render verbatim.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Marker prepended to the rendering of every trailing token.
pub const TRAILING_PREFIX: &str = "##";

/// Special tokens placed at the head of every vocabulary, in id order.
pub const DEFAULT_SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Default set of sentence-terminating characters.
pub const DEFAULT_SENTENCE_STOPS: [char; 6] = ['.', '!', '?', '。', '！', '？'];

/// Where a byte sequence sits inside a word.
///
/// Vocabularies trained without the leading/trailing distinction store every
/// token as `Leading`, which renders without decoration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Position {
    Leading,
    Trailing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Learned,
    Fallback,
    Special,
    SentenceStop,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ByteToken {
    /// A non-empty octet sequence. Single octets are fallbacks, longer
    /// sequences are learned merges.
    Bytes {
        bytes: Vec<u8>,
        position: Position,
    },
    Special(String),
    SentenceStop(char),
}

impl ByteToken {
    pub fn leading(bytes: impl Into<Vec<u8>>) -> Self {
        ByteToken::Bytes {
            bytes: bytes.into(),
            position: Position::Leading,
        }
    }

    pub fn trailing(bytes: impl Into<Vec<u8>>) -> Self {
        ByteToken::Bytes {
            bytes: bytes.into(),
            position: Position::Trailing,
        }
    }

    pub fn new(bytes: impl Into<Vec<u8>>, position: Position) -> Self {
        ByteToken::Bytes {
            bytes: bytes.into(),
            position,
        }
    }

    pub fn kind(&self) -> TokenKind {
        match self {
            ByteToken::Bytes { bytes, .. } if bytes.len() == 1 => TokenKind::Fallback,
            ByteToken::Bytes { .. } => TokenKind::Learned,
            ByteToken::Special(_) => TokenKind::Special,
            ByteToken::SentenceStop(_) => TokenKind::SentenceStop,
        }
    }

    /// Octets carried by the token; empty for specials and sentence stops.
    pub fn bytes(&self) -> &[u8] {
        match self {
            ByteToken::Bytes { bytes, .. } => bytes,
            _ => &[],
        }
    }

    pub fn position(&self) -> Option<Position> {
        match self {
            ByteToken::Bytes { position, .. } => Some(*position),
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            ByteToken::Bytes { bytes, .. } => !bytes.is_empty(),
            ByteToken::Special(text) => !text.is_empty(),
            ByteToken::SentenceStop(_) => true,
        }
    }

    pub fn render(&self) -> RenderedToken {
        render_token(self)
    }
}

impl fmt::Display for ByteToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(render_token(self).as_str())
    }
}

/// The text form of a token as it appears in vocab files and CLI output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RenderedToken(String);

impl RenderedToken {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for RenderedToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for RenderedToken {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl From<RenderedToken> for String {
    fn from(t: RenderedToken) -> String {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("malformed token {0:?}")]
    MalformedToken(String),
}

const HEX_DIGITS: &[u8; 16] = b"0123456789ABCDEF";

pub fn hex_upper(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for &b in bytes {
        out.push(HEX_DIGITS[(b >> 4) as usize] as char);
        out.push(HEX_DIGITS[(b & 0x0F) as usize] as char);
    }
    out
}

fn hex_value(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

/// Decodes uppercase hex pairs. Lowercase digits are rejected so that every
/// byte sequence has exactly one accepted spelling.
pub fn parse_hex_upper(text: &str) -> Option<Vec<u8>> {
    let raw = text.as_bytes();
    if raw.is_empty() || !raw.len().is_multiple_of(2) {
        return None;
    }
    raw.chunks_exact(2)
        .map(|pair| Some(hex_value(pair[0])? << 4 | hex_value(pair[1])?))
        .collect()
}

pub fn render_token(token: &ByteToken) -> RenderedToken {
    match token {
        ByteToken::Bytes { bytes, position } => {
            let hex = hex_upper(bytes);
            match position {
                Position::Leading => RenderedToken(hex),
                Position::Trailing => RenderedToken(format!("{TRAILING_PREFIX}{hex}")),
            }
        }
        ByteToken::Special(text) => RenderedToken(text.clone()),
        ByteToken::SentenceStop(ch) => RenderedToken(ch.to_string()),
    }
}

/// The specials and sentence stops that `parse_token` accepts verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenRegistry {
    specials: BTreeSet<String>,
    sentence_stops: BTreeSet<char>,
}

impl Default for TokenRegistry {
    fn default() -> Self {
        TokenRegistry::new(
            DEFAULT_SPECIALS.iter().map(|s| s.to_string()),
            DEFAULT_SENTENCE_STOPS,
        )
    }
}

impl TokenRegistry {
    pub fn new(
        specials: impl IntoIterator<Item = String>,
        sentence_stops: impl IntoIterator<Item = char>,
    ) -> Self {
        TokenRegistry {
            specials: specials.into_iter().collect(),
            sentence_stops: sentence_stops.into_iter().collect(),
        }
    }

    pub fn is_special(&self, text: &str) -> bool {
        self.specials.contains(text)
    }

    pub fn is_sentence_stop(&self, ch: char) -> bool {
        self.sentence_stops.contains(&ch)
    }
}

/// Inverse of [`render_token`].
pub fn parse_token(text: &str, registry: &TokenRegistry) -> Result<ByteToken, TokenError> {
    if registry.is_special(text) {
        return Ok(ByteToken::Special(text.to_string()));
    }
    let mut chars = text.chars();
    if let (Some(ch), None) = (chars.next(), chars.next()) {
        if registry.is_sentence_stop(ch) {
            return Ok(ByteToken::SentenceStop(ch));
        }
    }
    let (body, position) = match text.strip_prefix(TRAILING_PREFIX) {
        Some(rest) => (rest, Position::Trailing),
        None => (text, Position::Leading),
    };
    parse_hex_upper(body)
        .map(|bytes| ByteToken::Bytes { bytes, position })
        .ok_or_else(|| TokenError::MalformedToken(text.to_string()))
}
