//! Vocabulary diagnostics: token frequency profiles over a corpus,
//! per-script vocabulary histograms and their relative differences, and
//! side-by-side tokenization of the same text under two vocabularies.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rayon::prelude::*;
use unicode_script::{Script, UnicodeScript};

use crate::preprocess::{Preprocessor, Segment};
use crate::token::{TokenKind, TRAILING_PREFIX};
use crate::tokenizer::{Tokenizer, TokenizerError, TokenizerOptions};
use crate::vocab::{TextEntry, VocabSource, Vocabulary};

pub const FRAGMENT_LABEL: &str = "fragment";
pub const COMMON_LABEL: &str = "common";

/// Words longer than this many characters become `[UNK]` under WordPiece
/// matching.
const MAX_WORDPIECE_CHARS: usize = 100;

/// Greedy longest-match-first segmentation over a text vocabulary.
#[derive(Debug, Clone)]
pub struct WordPieceMatcher {
    vocab: Vocabulary,
    preprocessor: Preprocessor,
    unk: Option<u32>,
}

impl WordPieceMatcher {
    pub fn new(vocab: Vocabulary) -> Self {
        let unk = vocab.id_of("[UNK]");
        WordPieceMatcher {
            vocab,
            preprocessor: Preprocessor::default(),
            unk,
        }
    }

    fn word_ids(&self, word: &str, out: &mut Vec<u32>) {
        if word.chars().count() > MAX_WORDPIECE_CHARS {
            out.extend(self.unk);
            return;
        }
        let start_len = out.len();
        let mut start = 0;
        let mut probe = String::new();
        while start < word.len() {
            let mut end = word.len();
            let mut found = None;
            while end > start {
                probe.clear();
                if start > 0 {
                    probe.push_str(TRAILING_PREFIX);
                }
                probe.push_str(&word[start..end]);
                if let Some(id) = self.vocab.id_of(&probe) {
                    found = Some(id);
                    break;
                }
                end = word[start..end]
                    .char_indices()
                    .last()
                    .map_or(start, |(i, _)| start + i);
            }
            match found {
                Some(id) => {
                    out.push(id);
                    start = end;
                }
                None => {
                    out.truncate(start_len);
                    out.extend(self.unk);
                    return;
                }
            }
        }
    }

    pub fn encode(&self, raw: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        let normalized = self.preprocessor.normalize(raw);
        for word in normalized.split(' ').filter(|w| !w.is_empty()) {
            self.word_ids(word, &mut ids);
        }
        ids
    }
}

/// Either kind of segmenter, so diagnostics can treat both vocabularies alike.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum AnyTokenizer {
    ByteLevel(Tokenizer),
    WordPiece(WordPieceMatcher),
}

impl AnyTokenizer {
    pub fn for_vocab(vocab: Vocabulary) -> Result<AnyTokenizer, TokenizerError> {
        match vocab.source() {
            VocabSource::Bbpe => Ok(AnyTokenizer::ByteLevel(Tokenizer::new(
                vocab,
                TokenizerOptions::default(),
            )?)),
            VocabSource::ExternalText => Ok(AnyTokenizer::WordPiece(WordPieceMatcher::new(vocab))),
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            AnyTokenizer::ByteLevel(t) => t.vocab(),
            AnyTokenizer::WordPiece(w) => &w.vocab,
        }
    }

    pub fn encode(&self, raw: &str) -> Vec<u32> {
        match self {
            AnyTokenizer::ByteLevel(t) => t.encode(raw),
            AnyTokenizer::WordPiece(w) => w.encode(raw),
        }
    }

    pub fn tokenize(&self, raw: &str) -> Vec<String> {
        match self {
            AnyTokenizer::ByteLevel(t) => t.tokenize(raw).into_iter().map(String::from).collect(),
            AnyTokenizer::WordPiece(w) => w
                .encode(raw)
                .into_iter()
                .map(|id| w.vocab.rendered_token(id).unwrap_or_default().to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileEntry {
    pub id: u32,
    pub token: String,
    pub kind: TokenKind,
    pub count: u64,
}

/// Per-token occurrence counts of a vocabulary over a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyProfile {
    pub entries: Vec<ProfileEntry>,
}

impl FrequencyProfile {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Entries by descending count, ties by id.
    pub fn sorted(&self) -> Vec<&ProfileEntry> {
        let mut v: Vec<&ProfileEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.count.cmp(&a.count).then(a.id.cmp(&b.id)));
        v
    }

    pub fn sorted_counts(&self) -> Vec<u64> {
        self.sorted().iter().map(|e| e.count).collect()
    }

    fn scored(&self) -> impl Iterator<Item = &ProfileEntry> {
        self.entries.iter().filter(|e| e.kind != TokenKind::Special)
    }

    /// Share of non-special tokens occurring fewer than `threshold` times.
    pub fn fraction_below(&self, threshold: u64) -> f64 {
        let n = self.scored().count();
        if n == 0 {
            return 0.0;
        }
        self.scored().filter(|e| e.count < threshold).count() as f64 / n as f64
    }

    pub fn fraction_zero(&self) -> f64 {
        self.fraction_below(1)
    }

    pub fn restrict(&self, keep: impl Fn(&ProfileEntry) -> bool) -> FrequencyProfile {
        FrequencyProfile {
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn learned_only(&self) -> FrequencyProfile {
        self.restrict(|e| e.kind == TokenKind::Learned)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["token", "count"])?;
        for e in self.sorted() {
            w.write_record([e.token.as_str(), e.count.to_string().as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rank/frequency curve on a log scale, as a standalone SVG document.
    pub fn write_svg<O: Write>(&self, mut out: O, title: &str) -> io::Result<()> {
        const W: f64 = 640.0;
        const H: f64 = 360.0;
        const PAD: f64 = 40.0;
        let counts = self.sorted_counts();
        let max_log = counts
            .first()
            .map_or(1.0, |&c| ((c + 1) as f64).log10().max(1.0));
        let n = counts.len().max(2) as f64 - 1.0;
        let points: Vec<String> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let x = PAD + (W - 2.0 * PAD) * i as f64 / n;
                let y = H - PAD - (H - 2.0 * PAD) * ((c + 1) as f64).log10() / max_log;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        )?;
        writeln!(
            out,
            r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
            xml_escape(title)
        )?;
        writeln!(
            out,
            r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
            H - PAD,
            W - PAD
        )?;
        writeln!(
            out,
            r#"<polyline fill="none" stroke="steelblue" points="{}"/>"#,
            points.join(" ")
        )?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">rank (log10(count+1) on y)</text>"#,
            W / 2.0 - 60.0,
            H - 10.0
        )?;
        writeln!(out, "</svg>")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn entry_kind(vocab: &Vocabulary, id: u32) -> TokenKind {
    match vocab.source() {
        VocabSource::Bbpe => vocab.token(id).map_or(TokenKind::Learned, |t| t.kind()),
        VocabSource::ExternalText => match vocab.text_entry(id) {
            Some(TextEntry::Special(_)) => TokenKind::Special,
            _ => TokenKind::Learned,
        },
    }
}

/// Counts tokens emitted while segmenting every line. Lines are scanned in
/// parallel; the result does not depend on the thread count.
pub fn frequency_profile_with<S: AsRef<str> + Sync>(
    tokenizer: &AnyTokenizer,
    corpus: &[S],
) -> FrequencyProfile {
    let vocab = tokenizer.vocab();
    let n = vocab.len();
    let counts = corpus
        .par_iter()
        .fold(
            || vec![0u64; n],
            |mut acc, line| {
                for id in tokenizer.encode(line.as_ref()) {
                    acc[id as usize] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let entries = counts
        .into_iter()
        .enumerate()
        .map(|(id, count)| {
            let id = id as u32;
            ProfileEntry {
                id,
                token: vocab.rendered_token(id).unwrap_or_default().to_string(),
                kind: entry_kind(vocab, id),
                count,
            }
        })
        .collect();
    FrequencyProfile { entries }
}

pub fn frequency_profile<S: AsRef<str> + Sync>(
    vocab: &Vocabulary,
    corpus: &[S],
) -> Result<FrequencyProfile, TokenizerError> {
    let tokenizer = AnyTokenizer::for_vocab(vocab.clone())?;
    Ok(frequency_profile_with(&tokenizer, corpus))
}

/// Maps Unicode scripts to report labels. Unmapped scripts use their
/// lowercase name (`latin`, `han`, `cyrillic`, ...).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptMap {
    overrides: BTreeMap<String, String>,
}

impl ScriptMap {
    pub fn new() -> Self {
        ScriptMap::default()
    }

    /// `script` is matched case-insensitively against full script names.
    pub fn with(mut self, script: &str, label: &str) -> Self {
        self.insert(script, label);
        self
    }

    pub fn insert(&mut self, script: &str, label: &str) {
        self.overrides
            .insert(script.to_lowercase().replace(' ', "_"), label.to_string());
    }

    fn label(&self, script: Script) -> Option<String> {
        match script {
            Script::Common | Script::Inherited | Script::Unknown => None,
            s => {
                let name = s.full_name().to_lowercase().replace(' ', "_");
                Some(self.overrides.get(&name).cloned().unwrap_or(name))
            }
        }
    }
}

/// Label for a token's content: the majority script of its decoded
/// characters, `common` when only shared characters occur, `fragment` when
/// the bytes are not valid UTF-8.
pub fn classify_token_language(content: &[u8], map: &ScriptMap) -> String {
    let Ok(text) = std::str::from_utf8(content) else {
        return FRAGMENT_LABEL.to_string();
    };
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for ch in text.chars() {
        if let Some(label) = map.label(ch.script()) {
            *tally.entry(label).or_insert(0) += 1;
        }
    }
    // Max count; ties go to the alphabetically first label.
    tally
        .into_iter()
        .fold(None::<(String, usize)>, |best, (label, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((label, n)),
        })
        .map_or_else(|| COMMON_LABEL.to_string(), |(label, _)| label)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanguageHistogram(pub BTreeMap<String, u64>);

impl LanguageHistogram {
    pub fn get(&self, label: &str) -> u64 {
        self.0.get(label).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}

pub fn vocab_language_histogram(vocab: &Vocabulary, map: &ScriptMap) -> LanguageHistogram {
    let mut hist = BTreeMap::new();
    for id in 0..vocab.len() as u32 {
        if let Some(content) = vocab.content_bytes(id) {
            *hist
                .entry(classify_token_language(&content, map))
                .or_insert(0) += 1;
        }
    }
    LanguageHistogram(hist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffRow {
    pub label: String,
    pub count_a: u64,
    pub count_b: u64,
    /// `(countA - countB) / countA`; `None` when `countA` is zero.
    pub rel_diff: Option<f64>,
}

pub fn histogram_diff(a: &LanguageHistogram, b: &LanguageHistogram) -> Vec<DiffRow> {
    let mut labels: Vec<&String> = a.0.keys().chain(b.0.keys()).collect();
    labels.sort();
    labels.dedup();
    labels
        .into_iter()
        .map(|label| {
            let (ca, cb) = (a.get(label), b.get(label));
            DiffRow {
                label: label.clone(),
                count_a: ca,
                count_b: cb,
                rel_diff: (ca > 0).then(|| (ca as f64 - cb as f64) / ca as f64),
            }
        })
        .collect()
}

pub fn vocab_diff(a: &Vocabulary, b: &Vocabulary, map: &ScriptMap) -> Vec<DiffRow> {
    histogram_diff(
        &vocab_language_histogram(a, map),
        &vocab_language_histogram(b, map),
    )
}

/// CSV with header `label,countA,countB,rel_diff`; undefined ratios are empty.
pub fn write_diff_csv<W: Write>(out: W, rows: &[DiffRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "countA", "countB", "rel_diff"])?;
    for r in rows {
        let rel = r.rel_diff.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([
            r.label.as_str(),
            &r.count_a.to_string(),
            &r.count_b.to_string(),
            &rel,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub tokens_a: Vec<String>,
    pub tokens_b: Vec<String>,
    pub count_a: usize,
    pub count_b: usize,
}

pub fn tokenization_compare(text: &str, a: &AnyTokenizer, b: &AnyTokenizer) -> Comparison {
    let tokens_a = a.tokenize(text);
    let tokens_b = b.tokenize(text);
    Comparison {
        count_a: tokens_a.len(),
        count_b: tokens_b.len(),
        tokens_a,
        tokens_b,
    }
}

/// Text of each byte-level word, for display beside its hex tokens.
pub fn word_texts(tokenizer: &Tokenizer, raw: &str) -> Vec<String> {
    tokenizer
        .preprocessor()
        .preprocess(raw)
        .segments
        .iter()
        .map(|s| match s {
            Segment::Word(w) => w.to_string(),
            Segment::SentenceStop(c) => c.to_string(),
        })
        .collect()
}

/// Counts of each label over a set of token contents; used for shard merges.
pub fn merge_histograms(parts: impl IntoIterator<Item = LanguageHistogram>) -> LanguageHistogram {
    let mut total: HashMap<String, u64> = HashMap::new();
    for part in parts {
        for (k, v) in part.0 {
            *total.entry(k).or_insert(0) += v;
        }
    }
    LanguageHistogram(total.into_iter().collect())
}
