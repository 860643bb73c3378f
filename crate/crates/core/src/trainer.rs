//! Byte-level BPE training.
//!
//! Words are counted once, then the most frequent adjacent pair of symbols is
//! fused repeatedly. Merges never cross a word boundary and never span a
//! sentence stop, since sentence stops are not part of any word.
//!
//! Two paths are provided. [`pair_counts`], [`select_pair`] and
//! [`apply_merge`] operate on a [`WordTable`] and recount from scratch; they
//! compose into [`train_reference`]. [`train`] keeps pair counts up to date
//! incrementally and must produce the same merge list.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::preprocess::{PreprocessConfig, PreprocessedText, Preprocessor};
use crate::token::{parse_token, ByteToken, Position, TokenRegistry, DEFAULT_SPECIALS};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// Final vocabulary size, counting specials, fallbacks and sentence stops.
    pub vocab_size: usize,
    pub min_pair_frequency: u64,
    /// `false` trains without the leading/trailing split (the WWB variant).
    pub distinguish_leading: bool,
    pub max_token_bytes: usize,
    pub specials: Vec<String>,
    pub preprocess: PreprocessConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            vocab_size: 100_000,
            min_pair_frequency: 2,
            distinguish_leading: true,
            max_token_bytes: 16,
            specials: DEFAULT_SPECIALS.iter().map(|s| s.to_string()).collect(),
            preprocess: PreprocessConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn fallback_count(&self) -> usize {
        if self.distinguish_leading {
            512
        } else {
            256
        }
    }

    /// Entries that exist before any merge is learned.
    pub fn reserved_entries(&self) -> usize {
        self.specials.len()
            + self.fallback_count()
            + Preprocessor::new(self.preprocess.clone())
                .atomic_sentence_stops()
                .len()
    }

    /// Upper bound on distinct learned tokens.
    pub fn merge_budget(&self) -> usize {
        self.vocab_size.saturating_sub(self.reserved_entries())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let floor = self.fallback_count() + self.specials.len();
        if self.vocab_size <= floor {
            return Err(TrainError::InvalidConfig(format!(
                "vocab_size {} must exceed {floor} (fallbacks plus specials)",
                self.vocab_size
            )));
        }
        if self.max_token_bytes < 2 {
            return Err(TrainError::InvalidConfig(
                "max_token_bytes must be at least 2".into(),
            ));
        }
        Ok(())
    }

    fn initial_position(&self, index: usize) -> Position {
        if self.distinguish_leading && index > 0 {
            Position::Trailing
        } else {
            Position::Leading
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainWarning {
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MergeRule {
    pub left: ByteToken,
    pub right: ByteToken,
    pub merged: ByteToken,
    pub count: u64,
    pub rank: usize,
}

impl MergeRule {
    pub fn new(left: ByteToken, right: ByteToken, count: u64, rank: usize) -> Self {
        let merged = merge_tokens(&left, &right);
        MergeRule {
            left,
            right,
            merged,
            count,
            rank,
        }
    }
}

/// Concatenates the bytes of two tokens; the result keeps the left position.
pub fn merge_tokens(left: &ByteToken, right: &ByteToken) -> ByteToken {
    let mut bytes = Vec::with_capacity(left.bytes().len() + right.bytes().len());
    bytes.extend_from_slice(left.bytes());
    bytes.extend_from_slice(right.bytes());
    ByteToken::new(bytes, left.position().unwrap_or(Position::Leading))
}

/// Symbol sequences of distinct words with their corpus counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordTable(pub BTreeMap<Vec<ByteToken>, u64>);

impl WordTable {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<ByteToken>, &u64)> {
        self.0.iter()
    }

    pub fn from_byte_counts(counts: &HashMap<Vec<u8>, u64>, distinguish_leading: bool) -> Self {
        let cfg = TrainerConfig {
            distinguish_leading,
            ..Default::default()
        };
        let mut table = BTreeMap::new();
        for (word, &count) in counts {
            let symbols = word
                .iter()
                .enumerate()
                .map(|(i, &b)| ByteToken::new([b], cfg.initial_position(i)))
                .collect();
            table.insert(symbols, count);
        }
        WordTable(table)
    }
}

/// Counts distinct words (as raw bytes) across a corpus. Sentence stops are
/// skipped.
pub fn count_word_bytes<'a>(
    corpus: impl IntoIterator<Item = &'a PreprocessedText>,
) -> HashMap<Vec<u8>, u64> {
    let mut counts = HashMap::new();
    for text in corpus {
        for word in text.words() {
            *counts.entry(word.bytes().to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Preprocesses and counts words of raw lines in parallel. The result does not
/// depend on the number of worker threads.
pub fn count_lines<S: AsRef<str> + Sync>(
    lines: &[S],
    preprocessor: &Preprocessor,
) -> HashMap<Vec<u8>, u64> {
    lines
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<Vec<u8>, u64>, line| {
            for word in preprocessor.preprocess(line.as_ref()).words() {
                *acc.entry(word.bytes().to_vec()).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, merge_counts)
}

fn merge_counts(mut a: HashMap<Vec<u8>, u64>, b: HashMap<Vec<u8>, u64>) -> HashMap<Vec<u8>, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

pub fn count_words<'a>(
    corpus: impl IntoIterator<Item = &'a PreprocessedText>,
    distinguish_leading: bool,
) -> WordTable {
    WordTable::from_byte_counts(&count_word_bytes(corpus), distinguish_leading)
}

pub fn pair_counts(table: &WordTable) -> BTreeMap<(ByteToken, ByteToken), u64> {
    let mut counts = BTreeMap::new();
    for (symbols, &count) in table.iter() {
        for pair in symbols.windows(2) {
            *counts
                .entry((pair[0].clone(), pair[1].clone()))
                .or_insert(0) += count;
        }
    }
    counts
}

/// Tie-break key: lexicographic on (left bytes, left position, right bytes,
/// right position).
fn pair_key(pair: &(ByteToken, ByteToken)) -> (&[u8], Option<Position>, &[u8], Option<Position>) {
    (
        pair.0.bytes(),
        pair.0.position(),
        pair.1.bytes(),
        pair.1.position(),
    )
}

/// Most frequent pair within the byte cap, or `None` when the best count is
/// below `min_pair_frequency`.
pub fn select_pair(
    counts: &BTreeMap<(ByteToken, ByteToken), u64>,
    cfg: &TrainerConfig,
) -> Option<(ByteToken, ByteToken)> {
    counts
        .iter()
        .filter(|(pair, _)| pair.0.bytes().len() + pair.1.bytes().len() <= cfg.max_token_bytes)
        .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pair_key(pb).cmp(&pair_key(pa))))
        .filter(|(_, &count)| count >= cfg.min_pair_frequency && count > 0)
        .map(|(pair, _)| pair.clone())
}

/// Non-overlapping, left-to-right replacement of `left right` by `merged`.
fn replace_pair<T: PartialEq + Clone>(symbols: &[T], left: &T, right: &T, merged: &T) -> Vec<T> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == *left && symbols[i + 1] == *right {
            out.push(merged.clone());
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

pub fn apply_merge(table: &WordTable, rule: &MergeRule) -> WordTable {
    let mut out = BTreeMap::new();
    for (symbols, &count) in table.iter() {
        let merged = replace_pair(symbols, &rule.left, &rule.right, &rule.merged);
        *out.entry(merged).or_insert(0) += count;
    }
    WordTable(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub merges: Vec<MergeRule>,
    /// Distinct learned tokens in order of first creation.
    pub learned: Vec<ByteToken>,
    /// Occurrences of every symbol left in the final segmentation of the
    /// training words.
    pub final_counts: BTreeMap<ByteToken, u64>,
    pub distinguish_leading: bool,
    pub warnings: Vec<TrainWarning>,
}

impl TrainOutput {
    fn empty(cfg: &TrainerConfig) -> Self {
        TrainOutput {
            merges: Vec::new(),
            learned: Vec::new(),
            final_counts: BTreeMap::new(),
            distinguish_leading: cfg.distinguish_leading,
            warnings: vec![TrainWarning::EmptyCorpus],
        }
    }
}

/// Full-recount trainer composed of the table operations.
pub fn train_reference(table: &WordTable, cfg: &TrainerConfig) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    if table.is_empty() {
        return Ok(TrainOutput::empty(cfg));
    }
    let budget = cfg.merge_budget();
    let mut table = table.clone();
    let mut merges = Vec::new();
    let mut learned: Vec<ByteToken> = Vec::new();
    while learned.len() < budget {
        let counts = pair_counts(&table);
        let Some((left, right)) = select_pair(&counts, cfg) else {
            break;
        };
        let count = counts[&(left.clone(), right.clone())];
        let rule = MergeRule::new(left, right, count, merges.len());
        if !learned.contains(&rule.merged) {
            learned.push(rule.merged.clone());
        }
        table = apply_merge(&table, &rule);
        merges.push(rule);
    }
    let mut final_counts = BTreeMap::new();
    for (symbols, &count) in table.iter() {
        for s in symbols {
            *final_counts.entry(s.clone()).or_insert(0) += count;
        }
    }
    Ok(TrainOutput {
        merges,
        learned,
        final_counts,
        distinguish_leading: cfg.distinguish_leading,
        warnings: Vec::new(),
    })
}

/// Interned symbols: `bytes[id]`, `position[id]`.
struct Symbols {
    bytes: Vec<Arc<[u8]>>,
    position: Vec<Position>,
    index: HashMap<(Arc<[u8]>, Position), u32>,
}

impl Symbols {
    fn new() -> Self {
        let mut s = Symbols {
            bytes: Vec::new(),
            position: Vec::new(),
            index: HashMap::new(),
        };
        for position in [Position::Leading, Position::Trailing] {
            for b in 0..=255u8 {
                s.intern(Arc::from(vec![b]), position);
            }
        }
        s
    }

    fn single(&self, byte: u8, position: Position) -> u32 {
        match position {
            Position::Leading => byte as u32,
            Position::Trailing => 256 + byte as u32,
        }
    }

    /// Returns the id and whether it was newly created.
    fn intern(&mut self, bytes: Arc<[u8]>, position: Position) -> (u32, bool) {
        match self.index.entry((bytes.clone(), position)) {
            Entry::Occupied(e) => (*e.get(), false),
            Entry::Vacant(e) => {
                let id = self.bytes.len() as u32;
                e.insert(id);
                self.bytes.push(bytes);
                self.position.push(position);
                (id, true)
            }
        }
    }

    fn token(&self, id: u32) -> ByteToken {
        ByteToken::new(self.bytes[id as usize].to_vec(), self.position[id as usize])
    }
}

/// Heap entry. Higher count wins; equal counts prefer the smaller key.
struct Candidate {
    count: u64,
    left_bytes: Arc<[u8]>,
    left_pos: Position,
    right_bytes: Arc<[u8]>,
    right_pos: Position,
    pair: (u32, u32),
}

impl Candidate {
    fn key(&self) -> (&[u8], Position, &[u8], Position) {
        (
            &self.left_bytes,
            self.left_pos,
            &self.right_bytes,
            self.right_pos,
        )
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.key().cmp(&self.key()))
    }
}

struct IncrementalState<'c> {
    cfg: &'c TrainerConfig,
    symbols: Symbols,
    words: Vec<Vec<u32>>,
    counts: Vec<u64>,
    pairs: HashMap<(u32, u32), u64>,
    /// Words that contained the pair at some point; may hold stale entries.
    occurrences: HashMap<(u32, u32), Vec<u32>>,
    heap: BinaryHeap<Candidate>,
}

impl<'c> IncrementalState<'c> {
    fn new(word_counts: &HashMap<Vec<u8>, u64>, cfg: &'c TrainerConfig) -> Self {
        let symbols = Symbols::new();
        // Sorted so that internal word indices are reproducible.
        let mut distinct: Vec<(&Vec<u8>, u64)> = word_counts.iter().map(|(w, &c)| (w, c)).collect();
        distinct.sort_unstable();
        let words: Vec<Vec<u32>> = distinct
            .iter()
            .map(|(w, _)| {
                w.iter()
                    .enumerate()
                    .map(|(i, &b)| symbols.single(b, cfg.initial_position(i)))
                    .collect()
            })
            .collect();
        let counts: Vec<u64> = distinct.iter().map(|&(_, c)| c).collect();

        let pairs = words
            .par_iter()
            .zip(counts.par_iter())
            .fold(
                HashMap::new,
                |mut acc: HashMap<(u32, u32), u64>, (w, &c)| {
                    for p in w.windows(2) {
                        *acc.entry((p[0], p[1])).or_insert(0) += c;
                    }
                    acc
                },
            )
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                a
            });

        let mut occurrences: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (idx, w) in words.iter().enumerate() {
            for p in w.windows(2) {
                let list = occurrences.entry((p[0], p[1])).or_default();
                if list.last() != Some(&(idx as u32)) {
                    list.push(idx as u32);
                }
            }
        }

        let mut state = IncrementalState {
            cfg,
            symbols,
            words,
            counts,
            pairs,
            occurrences,
            heap: BinaryHeap::new(),
        };
        let initial: Vec<((u32, u32), u64)> = state.pairs.iter().map(|(&p, &c)| (p, c)).collect();
        for (pair, count) in initial {
            state.push_candidate(pair, count);
        }
        state
    }

    fn push_candidate(&mut self, pair: (u32, u32), count: u64) {
        if count == 0 {
            return;
        }
        let (l, r) = (pair.0 as usize, pair.1 as usize);
        if self.symbols.bytes[l].len() + self.symbols.bytes[r].len() > self.cfg.max_token_bytes {
            return;
        }
        self.heap.push(Candidate {
            count,
            left_bytes: self.symbols.bytes[l].clone(),
            left_pos: self.symbols.position[l],
            right_bytes: self.symbols.bytes[r].clone(),
            right_pos: self.symbols.position[r],
            pair,
        });
    }

    fn pop_best(&mut self) -> Option<((u32, u32), u64)> {
        while let Some(c) = self.heap.pop() {
            if self.pairs.get(&c.pair).copied() == Some(c.count) {
                return Some((c.pair, c.count));
            }
        }
        None
    }

    /// Merges `pair` into `merged` in every word that holds it, updating pair
    /// counts as if they had been recounted.
    fn merge(&mut self, pair: (u32, u32), merged: u32) {
        let mut touched: Vec<u32> = self.occurrences.remove(&pair).unwrap_or_default();
        touched.sort_unstable();
        touched.dedup();
        let mut changed: HashMap<(u32, u32), ()> = HashMap::new();
        for idx in touched {
            let word = &self.words[idx as usize];
            if !word.windows(2).any(|p| (p[0], p[1]) == pair) {
                continue;
            }
            let count = self.counts[idx as usize];
            for p in word.windows(2) {
                let key = (p[0], p[1]);
                if let Entry::Occupied(mut e) = self.pairs.entry(key) {
                    *e.get_mut() -= count;
                    if *e.get() == 0 {
                        e.remove();
                    }
                }
                changed.insert(key, ());
            }
            let replaced = replace_pair(word, &pair.0, &pair.1, &merged);
            for p in replaced.windows(2) {
                let key = (p[0], p[1]);
                *self.pairs.entry(key).or_insert(0) += count;
                let list = self.occurrences.entry(key).or_default();
                if list.last() != Some(&idx) {
                    list.push(idx);
                }
                changed.insert(key, ());
            }
            self.words[idx as usize] = replaced;
        }
        let mut changed: Vec<(u32, u32)> = changed.into_keys().collect();
        changed.sort_unstable();
        for key in changed {
            let count = self.pairs.get(&key).copied().unwrap_or(0);
            self.push_candidate(key, count);
        }
    }
}

/// Trains merges from word counts, maintaining pair counts incrementally.
pub fn train_word_counts(
    word_counts: &HashMap<Vec<u8>, u64>,
    cfg: &TrainerConfig,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    if word_counts.is_empty() {
        log::warn!("training corpus is empty; vocabulary will hold fallbacks only");
        return Ok(TrainOutput::empty(cfg));
    }
    let budget = cfg.merge_budget();
    let mut state = IncrementalState::new(word_counts, cfg);
    let mut merges = Vec::new();
    let mut learned = Vec::new();

    while learned.len() < budget {
        let Some((pair, count)) = state.pop_best() else {
            break;
        };
        if count < cfg.min_pair_frequency {
            break;
        }
        let (l, r) = (pair.0 as usize, pair.1 as usize);
        let mut bytes =
            Vec::with_capacity(state.symbols.bytes[l].len() + state.symbols.bytes[r].len());
        bytes.extend_from_slice(&state.symbols.bytes[l]);
        bytes.extend_from_slice(&state.symbols.bytes[r]);
        let (merged, fresh) = state
            .symbols
            .intern(Arc::from(bytes), state.symbols.position[l]);
        if fresh {
            learned.push(state.symbols.token(merged));
        }
        merges.push(MergeRule {
            left: state.symbols.token(pair.0),
            right: state.symbols.token(pair.1),
            merged: state.symbols.token(merged),
            count,
            rank: merges.len(),
        });
        state.merge(pair, merged);
    }

    let mut final_counts = BTreeMap::new();
    for (word, &count) in state.words.iter().zip(&state.counts) {
        for &s in word {
            *final_counts.entry(state.symbols.token(s)).or_insert(0) += count;
        }
    }
    Ok(TrainOutput {
        merges,
        learned,
        final_counts,
        distinguish_leading: cfg.distinguish_leading,
        warnings: Vec::new(),
    })
}

pub fn train<'a>(
    corpus: impl IntoIterator<Item = &'a PreprocessedText>,
    cfg: &TrainerConfig,
) -> Result<TrainOutput, TrainError> {
    train_word_counts(&count_word_bytes(corpus), cfg)
}

/// Preprocesses raw lines with the configured rules and trains on them.
pub fn train_lines<S: AsRef<str> + Sync>(
    lines: &[S],
    cfg: &TrainerConfig,
) -> Result<TrainOutput, TrainError> {
    let preprocessor = Preprocessor::new(cfg.preprocess.clone());
    train_word_counts(&count_lines(lines, &preprocessor), cfg)
}

#[derive(Debug, Error)]
pub enum MergesFileError {
    #[error("merges line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Writes `RANK<TAB>LEFT<TAB>RIGHT<TAB>COUNT` lines.
pub fn write_merges<W: Write>(mut out: W, merges: &[MergeRule]) -> io::Result<()> {
    for m in merges {
        writeln!(out, "{}\t{}\t{}\t{}", m.rank, m.left, m.right, m.count)?;
    }
    Ok(())
}

pub fn read_merges<R: BufRead>(input: R) -> Result<Vec<MergeRule>, MergesFileError> {
    let registry = TokenRegistry::new(Vec::new(), Vec::new());
    let mut merges = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let malformed = |reason: String| MergesFileError::MalformedLine {
            line: lineno,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(malformed(format!(
                "expected 4 fields, found {}",
                fields.len()
            )));
        }
        let rank: usize = fields[0]
            .parse()
            .map_err(|e| malformed(format!("rank: {e}")))?;
        if rank != merges.len() {
            return Err(malformed(format!("rank {rank} out of sequence")));
        }
        let left = parse_token(fields[1], &registry).map_err(|e| malformed(e.to_string()))?;
        let right = parse_token(fields[2], &registry).map_err(|e| malformed(e.to_string()))?;
        let count: u64 = fields[3]
            .parse()
            .map_err(|e| malformed(format!("count: {e}")))?;
        merges.push(MergeRule::new(left, right, count, rank));
    }
    Ok(merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::preprocess;

    fn l(b: &[u8]) -> ByteToken {
        ByteToken::leading(b.to_vec())
    }

    fn t(b: &[u8]) -> ByteToken {
        ByteToken::trailing(b.to_vec())
    }

    fn small_cfg() -> TrainerConfig {
        TrainerConfig {
            vocab_size: 1000,
            ..Default::default()
        }
    }

    fn wwb_cfg() -> TrainerConfig {
        TrainerConfig {
            vocab_size: 1000,
            distinguish_leading: false,
            ..Default::default()
        }
    }

    fn plain_word(text: &str) -> Vec<ByteToken> {
        text.bytes().map(|b| l(&[b])).collect()
    }

    #[test]
    fn counts_words_from_corpus() {
        let table = count_words(&[preprocess("ab ab ab abc")], true);
        let expected: BTreeMap<_, _> = [
            (vec![l(b"a"), t(b"b")], 3),
            (vec![l(b"a"), t(b"b"), t(b"c")], 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(table.0, expected);
        assert!(count_words(std::iter::empty(), true).is_empty());
        let table = count_words(&[preprocess("你 你")], true);
        assert_eq!(
            table.0,
            [(vec![l(&[0xE4]), t(&[0xBD]), t(&[0xA0])], 2)]
                .into_iter()
                .collect()
        );
    }

    #[test]
    fn sentence_stops_are_not_counted() {
        let table = count_words(&[preprocess("好。好")], true);
        assert_eq!(table.len(), 1);
        assert_eq!(table.0.values().sum::<u64>(), 2);
    }

    #[test]
    fn pair_counts_match_bpe_example() {
        let table = WordTable([(plain_word("ABABABCABC"), 1)].into_iter().collect());
        let counts = pair_counts(&table);
        let (a, b, c) = (l(b"A"), l(b"B"), l(b"C"));
        assert_eq!(counts[&(a.clone(), b.clone())], 4);
        assert_eq!(counts[&(b.clone(), a.clone())], 2);
        assert_eq!(counts[&(b.clone(), c.clone())], 2);
        assert_eq!(counts[&(c.clone(), a.clone())], 1);
        assert_eq!(counts.len(), 4);
        assert_eq!(select_pair(&counts, &wwb_cfg()), Some((a, b)));
    }

    #[test]
    fn pair_counts_never_cross_words() {
        let table = count_words(&[preprocess("ab ab ab abc")], true);
        let counts = pair_counts(&table);
        assert_eq!(counts.len(), 2);
        assert_eq!(counts[&(l(b"a"), t(b"b"))], 4);
        assert_eq!(counts[&(t(b"b"), t(b"c"))], 1);
        assert!(pair_counts(&WordTable::default()).is_empty());
    }

    #[test]
    fn overlapping_runs_count_every_position() {
        let table = WordTable([(plain_word("AAA"), 1)].into_iter().collect());
        assert_eq!(pair_counts(&table)[&(l(b"A"), l(b"A"))], 2);
    }

    #[test]
    fn select_pair_breaks_ties_on_bytes() {
        let (z, c) = (l(b"Z"), l(b"C"));
        let counts: BTreeMap<_, _> = [((z.clone(), c.clone()), 2), ((z.clone(), z.clone()), 2)]
            .into_iter()
            .collect();
        assert_eq!(select_pair(&counts, &small_cfg()), Some((z, c)));
    }

    #[test]
    fn select_pair_respects_minimum_and_cap() {
        let counts: BTreeMap<_, _> = [((l(b"X"), l(b"Y")), 1)].into_iter().collect();
        assert_eq!(select_pair(&counts, &small_cfg()), None);
        let long = l(&[1; 16]);
        let counts: BTreeMap<_, _> = [((long.clone(), t(b"x")), 9), ((l(b"a"), t(b"b")), 3)]
            .into_iter()
            .collect();
        assert_eq!(select_pair(&counts, &small_cfg()), Some((l(b"a"), t(b"b"))));
    }

    #[test]
    fn apply_merge_examples() {
        let (z, c, y) = (l(b"Z"), l(b"C"), l(b"Y"));
        let table = WordTable(
            [(
                vec![
                    z.clone(),
                    z.clone(),
                    z.clone(),
                    c.clone(),
                    z.clone(),
                    c.clone(),
                ],
                1,
            )]
            .into_iter()
            .collect(),
        );
        let rule = MergeRule {
            left: z.clone(),
            right: c.clone(),
            merged: y.clone(),
            count: 2,
            rank: 1,
        };
        let out = apply_merge(&table, &rule);
        assert_eq!(
            out.0,
            [(vec![z.clone(), z, y.clone(), y], 1)]
                .into_iter()
                .collect()
        );

        let table = WordTable([(vec![l(b"a"), t(b"b")], 3)].into_iter().collect());
        let rule = MergeRule::new(l(b"a"), t(b"b"), 3, 0);
        assert_eq!(rule.merged, l(b"ab"));
        assert_eq!(
            apply_merge(&table, &rule).0,
            [(vec![l(b"ab")], 3)].into_iter().collect()
        );

        let untouched = WordTable([(vec![l(b"q")], 7)].into_iter().collect());
        assert_eq!(apply_merge(&untouched, &rule), untouched);
    }

    #[test]
    fn trains_small_corpus() {
        let out = train(&[preprocess("ab ab ab abc")], &small_cfg()).unwrap();
        let pairs: Vec<_> = out
            .merges
            .iter()
            .map(|m| (m.left.clone(), m.right.clone(), m.count))
            .collect();
        assert_eq!(
            pairs,
            vec![(l(b"a"), t(b"b"), 4)],
            "(ab, c) occurs once, below the default minimum of 2"
        );
        let cfg = TrainerConfig {
            min_pair_frequency: 1,
            ..small_cfg()
        };
        let out = train(&[preprocess("ab ab ab abc")], &cfg).unwrap();
        let merged: Vec<_> = out.merges.iter().map(|m| m.merged.clone()).collect();
        assert_eq!(merged, vec![l(b"ab"), l(b"abc")]);
        assert_eq!(out.learned, merged);
        assert_eq!(out.final_counts[&l(b"ab")], 3);
        assert_eq!(out.final_counts[&l(b"abc")], 1);
    }

    #[test]
    fn first_merge_on_bpe_example() {
        let out = train(&[preprocess("ABABABCABC")], &wwb_cfg()).unwrap();
        assert_eq!(out.merges[0].left, l(b"A"));
        assert_eq!(out.merges[0].right, l(b"B"));
        assert_eq!(out.merges[0].count, 4);
        // With position labels the leading A is its own symbol.
        let out = train(&[preprocess("ABABABCABC")], &small_cfg()).unwrap();
        assert_eq!(
            (out.merges[0].left.clone(), out.merges[0].right.clone()),
            (t(b"A"), t(b"B"))
        );
        assert_eq!(out.merges[0].count, 3);
    }

    #[test]
    fn empty_corpus_warns() {
        let out = train(std::iter::empty(), &small_cfg()).unwrap();
        assert!(out.merges.is_empty());
        assert_eq!(out.warnings, vec![TrainWarning::EmptyCorpus]);
    }

    #[test]
    fn rejects_undersized_vocab() {
        let cfg = TrainerConfig {
            vocab_size: 517,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(TrainError::InvalidConfig(_))));
        let cfg = TrainerConfig {
            vocab_size: 262,
            distinguish_leading: false,
            ..Default::default()
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn budget_limits_learned_tokens() {
        let cfg = TrainerConfig {
            vocab_size: small_cfg().reserved_entries() + 2,
            min_pair_frequency: 1,
            ..small_cfg()
        };
        let out = train(&[preprocess("abcdef abcdef ghij")], &cfg).unwrap();
        assert_eq!(out.learned.len(), 2);
    }

    #[test]
    fn max_token_bytes_caps_merges() {
        let cfg = TrainerConfig {
            max_token_bytes: 3,
            min_pair_frequency: 1,
            ..small_cfg()
        };
        let out = train(&[preprocess("abcdefgh abcdefgh")], &cfg).unwrap();
        assert!(out.learned.iter().all(|t| t.bytes().len() <= 3));
        assert!(!out.learned.is_empty());
    }

    #[test]
    fn incremental_matches_reference_on_fixed_corpora() {
        let corpora = [
            "ab ab ab abc",
            "aaaa aaa aa a",
            "the then there these this that thin",
            "你好 你们 我们 好的。好",
            "abab baba abba baab aabb bbaa",
        ];
        for text in corpora {
            for distinguish in [true, false] {
                let cfg = TrainerConfig {
                    min_pair_frequency: 1,
                    distinguish_leading: distinguish,
                    ..small_cfg()
                };
                let corpus = [preprocess(text)];
                let fast = train(&corpus, &cfg).unwrap();
                let slow = train_reference(&count_words(&corpus, distinguish), &cfg).unwrap();
                assert_eq!(fast, slow, "{text:?} distinguish={distinguish}");
            }
        }
    }

    #[test]
    fn merges_file_round_trip() {
        let out = train(&[preprocess("ab ab ab abc abd abd")], &small_cfg()).unwrap();
        let mut buf = Vec::new();
        write_merges(&mut buf, &out.merges).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("0\t61\t##62\t6\n"), "{text}");
        assert_eq!(read_merges(buf.as_slice()).unwrap(), out.merges);
        assert!(matches!(
            read_merges("0\t61\n".as_bytes()),
            Err(MergesFileError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            read_merges("1\t61\t##62\t3\n".as_bytes()),
            Err(MergesFileError::MalformedLine { line: 1, .. })
        ));
    }
}
