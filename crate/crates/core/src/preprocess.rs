//! Text normalization and conversion to byte-level words.
//!
//! CJK characters, punctuation and sentence stops are isolated with spaces,
//! whitespace runs collapse to one space, and every remaining
//! space-delimited word becomes the UTF-8 octets of its characters. The first
//! octet of a word is the leading byte; the rest are trailing.

use std::fmt;
use std::ops::RangeInclusive;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::token::DEFAULT_SENTENCE_STOPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharClass {
    Cjk,
    Punctuation,
    SentenceStop,
    Whitespace,
    Other,
}

/// Default CJK blocks: Unified Ideographs and Extension A, Hiragana,
/// Katakana, Hangul Syllables and Jamo, CJK Symbols and Punctuation.
pub const DEFAULT_CJK_RANGES: [RangeInclusive<u32>; 7] = [
    0x4E00..=0x9FFF,
    0x3400..=0x4DBF,
    0x3040..=0x309F,
    0x30A0..=0x30FF,
    0xAC00..=0xD7AF,
    0x1100..=0x11FF,
    0x3000..=0x303F,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub cjk_ranges: Vec<RangeInclusive<u32>>,
    pub sentence_stops: Vec<char>,
    /// Treat Unicode symbol categories (S*) as punctuation as well.
    pub symbols_as_punctuation: bool,
    /// Apply NFC before anything else.
    pub nfc: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            cjk_ranges: DEFAULT_CJK_RANGES.to_vec(),
            sentence_stops: DEFAULT_SENTENCE_STOPS.to_vec(),
            symbols_as_punctuation: false,
            nfc: false,
        }
    }
}

/// A whitespace-free run of octets that merges may not cross.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

impl Word {
    /// Returns `None` for empty input or input containing a whitespace octet.
    pub fn new(bytes: impl Into<Vec<u8>>) -> Option<Word> {
        let bytes = bytes.into();
        if bytes.is_empty()
            || bytes
                .iter()
                .any(|b| matches!(b, b' ' | b'\n' | b'\t' | b'\r'))
        {
            return None;
        }
        Some(Word(bytes))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Word(Word),
    SentenceStop(char),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreprocessedText {
    pub segments: Vec<Segment>,
}

impl PreprocessedText {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Word(w) => Some(w),
            Segment::SentenceStop(_) => None,
        })
    }

    /// Rebuilds normalized text: segments joined by single spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match seg {
                Segment::Word(w) => out.push_str(&String::from_utf8_lossy(w.bytes())),
                Segment::SentenceStop(c) => out.push(*c),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    config: PreprocessConfig,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig) -> Self {
        Preprocessor { config }
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    /// Precedence: sentence stop, punctuation, CJK, whitespace, other.
    pub fn classify_char(&self, ch: char) -> CharClass {
        if self.config.sentence_stops.contains(&ch) {
            return CharClass::SentenceStop;
        }
        if self.is_punctuation(ch) {
            return CharClass::Punctuation;
        }
        let cp = ch as u32;
        if self.config.cjk_ranges.iter().any(|r| r.contains(&cp)) {
            return CharClass::Cjk;
        }
        if ch.is_whitespace() {
            return CharClass::Whitespace;
        }
        CharClass::Other
    }

    fn is_punctuation(&self, ch: char) -> bool {
        use GeneralCategory::*;
        match get_general_category(ch) {
            ConnectorPunctuation | DashPunctuation | OpenPunctuation | ClosePunctuation
            | InitialPunctuation | FinalPunctuation | OtherPunctuation => true,
            MathSymbol | CurrencySymbol | ModifierSymbol | OtherSymbol => {
                self.config.symbols_as_punctuation
            }
            _ => false,
        }
    }

    pub fn normalize(&self, raw: &str) -> String {
        let composed;
        let text = if self.config.nfc {
            composed = raw.nfc().collect::<String>();
            composed.as_str()
        } else {
            raw
        };

        let mut out = String::with_capacity(text.len() + text.len() / 2);
        // Pending separator, emitted lazily so runs collapse and edges trim.
        let mut pending_space = false;
        for ch in text.chars() {
            match self.classify_char(ch) {
                CharClass::Whitespace => pending_space = true,
                CharClass::Cjk | CharClass::Punctuation | CharClass::SentenceStop => {
                    if !out.is_empty() {
                        out.push(' ');
                    }
                    out.push(ch);
                    pending_space = true;
                }
                CharClass::Other => {
                    if pending_space && !out.is_empty() {
                        out.push(' ');
                    }
                    pending_space = false;
                    out.push(ch);
                }
            }
        }
        out
    }

    /// Splits normalized text into words and atomic sentence stops.
    ///
    /// Only non-ASCII sentence stops become atomic segments. An ASCII stop is
    /// kept as a one-byte word, whose leading fallback already carries it
    /// losslessly.
    pub fn to_byte_words(&self, normalized: &str) -> PreprocessedText {
        let mut segments = Vec::new();
        for piece in normalized.split(|c| self.classify_char(c) == CharClass::Whitespace) {
            if piece.is_empty() {
                continue;
            }
            let mut chars = piece.chars();
            if let (Some(ch), None) = (chars.next(), chars.next()) {
                if !ch.is_ascii() && self.classify_char(ch) == CharClass::SentenceStop {
                    segments.push(Segment::SentenceStop(ch));
                    continue;
                }
            }
            // Cannot fail: the piece is non-empty and whitespace-free.
            if let Some(word) = Word::new(piece.as_bytes()) {
                segments.push(Segment::Word(word));
            }
        }
        PreprocessedText { segments }
    }

    pub fn preprocess(&self, raw: &str) -> PreprocessedText {
        self.to_byte_words(&self.normalize(raw))
    }

    /// Sentence stops that appear as atomic tokens in a vocabulary.
    pub fn atomic_sentence_stops(&self) -> Vec<char> {
        let mut stops: Vec<char> = self
            .config
            .sentence_stops
            .iter()
            .copied()
            .filter(|c| !c.is_ascii())
            .collect();
        stops.sort_unstable();
        stops.dedup();
        stops
    }
}

pub fn classify_char(ch: char) -> CharClass {
    Preprocessor::default().classify_char(ch)
}

pub fn normalize(raw: &str) -> String {
    Preprocessor::default().normalize(raw)
}

pub fn to_byte_words(normalized: &str) -> PreprocessedText {
    Preprocessor::default().to_byte_words(normalized)
}

pub fn preprocess(raw: &str) -> PreprocessedText {
    Preprocessor::default().preprocess(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn word(bytes: &[u8]) -> Segment {
        Segment::Word(Word::new(bytes).unwrap())
    }

    #[test]
    fn classifies_examples() {
        assert_eq!(classify_char('中'), CharClass::Cjk);
        assert_eq!(classify_char(' '), CharClass::Whitespace);
        assert_eq!(classify_char('。'), CharClass::SentenceStop);
        assert_eq!(classify_char('!'), CharClass::SentenceStop);
        assert_eq!(classify_char(','), CharClass::Punctuation);
        assert_eq!(classify_char('、'), CharClass::Punctuation);
        assert_eq!(classify_char('$'), CharClass::Other);
        assert_eq!(classify_char('a'), CharClass::Other);
        assert_eq!(classify_char('\u{3000}'), CharClass::Cjk);
    }

    #[test]
    fn cjk_membership_matches_configured_blocks() {
        let p = Preprocessor::default();
        for cp in (0x4E00u32..=0x9FFF).step_by(97) {
            let ch = char::from_u32(cp).unwrap();
            assert_eq!(p.classify_char(ch), CharClass::Cjk, "U+{cp:04X}");
        }
        // Outside every configured block.
        assert_eq!(p.classify_char('\u{20000}'), CharClass::Other);
        let narrow = Preprocessor::new(PreprocessConfig {
            cjk_ranges: vec![0x4E00..=0x4E00],
            ..Default::default()
        });
        assert_eq!(narrow.classify_char('\u{4E00}'), CharClass::Cjk);
        assert_eq!(narrow.classify_char('\u{4E01}'), CharClass::Other);
    }

    #[test]
    fn symbols_are_configurable() {
        let p = Preprocessor::new(PreprocessConfig {
            symbols_as_punctuation: true,
            ..Default::default()
        });
        assert_eq!(p.classify_char('$'), CharClass::Punctuation);
        assert_eq!(p.normalize("5$"), "5 $");
    }

    #[test]
    fn normalizes_examples() {
        assert_eq!(normalize("你好"), "你 好");
        assert_eq!(normalize("abc def"), "abc def");
        assert_eq!(normalize("中文2019年"), "中 文 2019 年");
        assert_eq!(normalize("  a \t\n b  "), "a b");
        assert_eq!(normalize("Hi!"), "Hi !");
        assert_eq!(normalize("(x)"), "( x )");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize(" \u{a0} "), "");
    }

    #[test]
    fn nfc_is_opt_in() {
        let decomposed = "e\u{301}";
        assert_eq!(normalize(decomposed), decomposed);
        let p = Preprocessor::new(PreprocessConfig {
            nfc: true,
            ..Default::default()
        });
        assert_eq!(p.normalize(decomposed), "\u{e9}");
    }

    #[test]
    fn byte_words_match_utf8() {
        assert_eq!(to_byte_words("Hi").segments, vec![word(&[0x48, 0x69])]);
        assert_eq!(
            to_byte_words("好").segments,
            vec![word(&[0xE5, 0xA5, 0xBD])]
        );
        assert!(to_byte_words("").is_empty());
    }

    #[test]
    fn preprocess_examples() {
        assert_eq!(
            preprocess("你好!").segments,
            vec![
                word(&[0xE4, 0xBD, 0xA0]),
                word(&[0xE5, 0xA5, 0xBD]),
                word(&[0x21])
            ]
        );
        assert!(preprocess(" ").is_empty());
        assert_eq!(
            preprocess("Go。").segments,
            vec![word(&[0x47, 0x6F]), Segment::SentenceStop('。')]
        );
    }

    #[test]
    fn word_rejects_whitespace_octets() {
        assert!(Word::new(b"a b".to_vec()).is_none());
        assert!(Word::new(b"a\tb".to_vec()).is_none());
        assert!(Word::new(Vec::new()).is_none());
        assert!(Word::new(b"ab".to_vec()).is_some());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC*") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn segments_rebuild_normalized_text(s in "\\PC*") {
            let n = normalize(&s);
            prop_assert_eq!(to_byte_words(&n).to_text(), n);
        }

        #[test]
        fn words_never_split_characters(s in any::<String>()) {
            for w in preprocess(&s).words() {
                prop_assert!(std::str::from_utf8(w.bytes()).is_ok());
                prop_assert!(!w.bytes().iter().any(|b| matches!(b, b' ' | b'\n' | b'\t' | b'\r')));
            }
        }

        #[test]
        fn ascii_words_concatenate_to_input(ws in proptest::collection::vec("[a-zA-Z0-9]{1,8}", 0..8)) {
            let sentence = ws.join(" ");
            let joined: Vec<u8> = preprocess(&sentence).words().flat_map(|w| w.bytes().to_vec()).collect();
            prop_assert_eq!(joined, sentence.replace(' ', "").into_bytes());
        }
    }
}
