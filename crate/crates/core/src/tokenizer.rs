//! Encoding text into byte-level tokens and decoding it back.
//!
//! Words are segmented by greedy longest match over the vocabulary: the first
//! token of a word is drawn from the leading entries, every later token from
//! the trailing ones. Because all 512 single-byte fallbacks are present this
//! never fails, and no input ever maps to `[UNK]`.

use std::collections::HashMap;

use thiserror::Error;

use crate::preprocess::{Preprocessor, Segment, Word};
use crate::token::{
    parse_token, ByteToken, Position, RenderedToken, TokenError, TokenKind, TokenRegistry,
    TRAILING_PREFIX,
};
use crate::trainer::MergeRule;
use crate::vocab::{VocabSource, Vocabulary};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Segmentation {
    #[default]
    GreedyLongestMatch,
    /// Apply learned merges in rank order, as during training.
    MergeReplay,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TokenizerOptions {
    /// Decorate continuation tokens with `##` at tokenize time. Requires a
    /// vocabulary trained without the leading/trailing distinction.
    pub wbl_mode: bool,
    pub segmentation: Segmentation,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenizerError {
    #[error("byte-level tokenization needs a bbpe vocabulary")]
    NotByteLevel,
    #[error("vocabulary lacks single-byte fallback {0}")]
    MissingFallback(String),
    #[error("WBL mode needs a vocabulary trained without the leading/trailing distinction")]
    WblRequiresUndistinguished,
    #[error("merge replay needs the merge list")]
    MissingMerges,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetokenizeError {
    #[error(transparent)]
    Malformed(#[from] TokenError),
    #[error("word {word} is not valid UTF-8")]
    InvalidUtf8 { word: usize },
    #[error("trailing token {token:?} does not continue a word")]
    OrphanTrailing { token: String },
    #[error("unknown token id {0}")]
    UnknownId(u32),
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(u8, u32)>,
    token: Option<u32>,
}

/// Byte trie answering longest-prefix queries.
#[derive(Debug, Clone)]
pub struct ByteTrie {
    nodes: Vec<TrieNode>,
}

impl Default for ByteTrie {
    fn default() -> Self {
        ByteTrie {
            nodes: vec![TrieNode::default()],
        }
    }
}

impl ByteTrie {
    pub fn insert(&mut self, bytes: &[u8], id: u32) {
        let mut node = 0usize;
        for &b in bytes {
            let children = &self.nodes[node].children;
            node = match children.binary_search_by_key(&b, |&(k, _)| k) {
                Ok(i) => children[i].1 as usize,
                Err(i) => {
                    let next = self.nodes.len() as u32;
                    self.nodes[node].children.insert(i, (b, next));
                    self.nodes.push(TrieNode::default());
                    next as usize
                }
            };
        }
        self.nodes[node].token = Some(id);
    }

    /// Length and id of the longest stored prefix of `bytes`.
    pub fn longest_prefix(&self, bytes: &[u8]) -> Option<(usize, u32)> {
        let mut node = 0usize;
        let mut best = None;
        for (i, &b) in bytes.iter().enumerate() {
            let children = &self.nodes[node].children;
            match children.binary_search_by_key(&b, |&(k, _)| k) {
                Ok(j) => node = children[j].1 as usize,
                Err(_) => break,
            }
            if let Some(id) = self.nodes[node].token {
                best = Some((i + 1, id));
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab: Vocabulary,
    options: TokenizerOptions,
    preprocessor: Preprocessor,
    leading: ByteTrie,
    /// `None` when the vocabulary has no trailing entries (WWB).
    trailing: Option<ByteTrie>,
    fallback_leading: [u32; 256],
    fallback_trailing: [u32; 256],
    stops: HashMap<char, u32>,
    /// (left id, right id) -> [(rank, merged id)], ranks ascending.
    merges: HashMap<(u32, u32), Vec<(usize, u32)>>,
}

impl Tokenizer {
    pub fn new(vocab: Vocabulary, options: TokenizerOptions) -> Result<Tokenizer, TokenizerError> {
        if options.segmentation == Segmentation::MergeReplay {
            return Err(TokenizerError::MissingMerges);
        }
        Tokenizer::build(vocab, options, &[])
    }

    pub fn with_merges(
        vocab: Vocabulary,
        merges: &[MergeRule],
        options: TokenizerOptions,
    ) -> Result<Tokenizer, TokenizerError> {
        Tokenizer::build(vocab, options, merges)
    }

    fn build(
        vocab: Vocabulary,
        options: TokenizerOptions,
        merge_rules: &[MergeRule],
    ) -> Result<Tokenizer, TokenizerError> {
        if vocab.source() != VocabSource::Bbpe {
            return Err(TokenizerError::NotByteLevel);
        }
        let distinguish = vocab.meta().distinguish_leading;
        if options.wbl_mode && distinguish {
            return Err(TokenizerError::WblRequiresUndistinguished);
        }

        let mut leading = ByteTrie::default();
        let mut trailing = distinguish.then(ByteTrie::default);
        let mut stops = HashMap::new();
        for (id, token) in vocab.byte_tokens().iter().enumerate() {
            let id = id as u32;
            match token {
                ByteToken::Bytes { bytes, position } => match (position, trailing.as_mut()) {
                    (Position::Trailing, Some(t)) => t.insert(bytes, id),
                    (Position::Trailing, None) => {}
                    (Position::Leading, _) => leading.insert(bytes, id),
                },
                ByteToken::SentenceStop(c) => {
                    stops.insert(*c, id);
                }
                ByteToken::Special(_) => {}
            }
        }

        let mut fallback_leading = [0u32; 256];
        let mut fallback_trailing = [0u32; 256];
        for b in 0..=255u8 {
            let lead = ByteToken::leading([b]);
            fallback_leading[b as usize] = vocab
                .id_of_token(&lead)
                .ok_or_else(|| TokenizerError::MissingFallback(lead.render().into_string()))?;
            fallback_trailing[b as usize] = if distinguish {
                let trail = ByteToken::trailing([b]);
                vocab
                    .id_of_token(&trail)
                    .ok_or_else(|| TokenizerError::MissingFallback(trail.render().into_string()))?
            } else {
                fallback_leading[b as usize]
            };
        }

        let mut merges: HashMap<(u32, u32), Vec<(usize, u32)>> = HashMap::new();
        for rule in merge_rules {
            let ids = (
                vocab.id_of_token(&rule.left),
                vocab.id_of_token(&rule.right),
                vocab.id_of_token(&rule.merged),
            );
            // Rules whose tokens were cut from the vocabulary are skipped.
            if let (Some(l), Some(r), Some(m)) = ids {
                merges.entry((l, r)).or_default().push((rule.rank, m));
            }
        }
        for ranks in merges.values_mut() {
            ranks.sort_unstable();
        }

        Ok(Tokenizer {
            preprocessor: Preprocessor::new(vocab.meta().preprocess.clone()),
            vocab,
            options,
            leading,
            trailing,
            fallback_leading,
            fallback_trailing,
            stops,
            merges,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn options(&self) -> TokenizerOptions {
        self.options
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    /// Token ids for one word; their bytes concatenate to the word.
    pub fn word_ids(&self, word: &[u8]) -> Vec<u32> {
        match self.options.segmentation {
            Segmentation::GreedyLongestMatch => self.greedy_ids(word),
            Segmentation::MergeReplay => self.replay_ids(word),
        }
    }

    fn greedy_ids(&self, word: &[u8]) -> Vec<u32> {
        let mut ids = Vec::with_capacity(word.len());
        let mut pos = 0;
        while pos < word.len() {
            let first = pos == 0;
            let trie = match (&self.trailing, first) {
                (Some(t), false) => t,
                _ => &self.leading,
            };
            let (len, id) = trie.longest_prefix(&word[pos..]).unwrap_or_else(|| {
                let table = if first {
                    &self.fallback_leading
                } else {
                    &self.fallback_trailing
                };
                (1, table[word[pos] as usize])
            });
            ids.push(id);
            pos += len;
        }
        ids
    }

    fn replay_ids(&self, word: &[u8]) -> Vec<u32> {
        let mut ids: Vec<u32> = word
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                if i == 0 {
                    self.fallback_leading[b as usize]
                } else {
                    self.fallback_trailing[b as usize]
                }
            })
            .collect();
        // Applies merges in rank order; only ranks after the last applied
        // one are eligible, which mirrors sequential application in training.
        let mut last_rank: Option<usize> = None;
        loop {
            let mut best: Option<(usize, (u32, u32), u32)> = None;
            for p in ids.windows(2) {
                let Some(ranks) = self.merges.get(&(p[0], p[1])) else {
                    continue;
                };
                let next = ranks
                    .iter()
                    .find(|(rank, _)| last_rank.is_none_or(|last| *rank > last));
                if let Some(&(rank, merged)) = next {
                    if best.is_none_or(|(r, _, _)| rank < r) {
                        best = Some((rank, (p[0], p[1]), merged));
                    }
                }
            }
            let Some((rank, (l, r), merged)) = best else {
                break;
            };
            let mut out = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == l && ids[i + 1] == r {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(ids[i]);
                    i += 1;
                }
            }
            ids = out;
            last_rank = Some(rank);
        }
        ids
    }

    pub fn tokenize_word(&self, word: &Word) -> Vec<ByteToken> {
        self.word_ids(word.bytes())
            .into_iter()
            .map(|id| {
                self.vocab
                    .token(id)
                    .cloned()
                    .expect("id from this vocabulary")
            })
            .collect()
    }

    /// Ids for raw text. Sentence stops map to their atomic entries.
    pub fn encode(&self, raw: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for segment in self.preprocessor.preprocess(raw).segments {
            match segment {
                Segment::Word(w) => ids.extend(self.word_ids(w.bytes())),
                Segment::SentenceStop(c) => match self.stops.get(&c) {
                    Some(&id) => ids.push(id),
                    // A stop without an entry is carried by its bytes.
                    None => ids.extend(self.word_ids(c.to_string().as_bytes())),
                },
            }
        }
        ids
    }

    /// Rendered tokens for raw text.
    pub fn tokenize(&self, raw: &str) -> Vec<RenderedToken> {
        let mut out = Vec::new();
        for segment in self.preprocessor.preprocess(raw).segments {
            match segment {
                Segment::Word(w) => {
                    let ids = self.word_ids(w.bytes());
                    out.extend(
                        ids.iter()
                            .enumerate()
                            .map(|(i, &id)| self.render_id(id, i > 0)),
                    );
                }
                Segment::SentenceStop(c) => match self.stops.get(&c) {
                    Some(&id) => out.push(self.render_id(id, false)),
                    None => {
                        let ids = self.word_ids(c.to_string().as_bytes());
                        out.extend(
                            ids.iter()
                                .enumerate()
                                .map(|(i, &id)| self.render_id(id, i > 0)),
                        );
                    }
                },
            }
        }
        out
    }

    fn render_id(&self, id: u32, continuation: bool) -> RenderedToken {
        let token = self.vocab.token(id).expect("id from this vocabulary");
        if self.options.wbl_mode && continuation {
            ByteToken::trailing(token.bytes().to_vec()).render()
        } else {
            token.render()
        }
    }

    pub fn tokenize_line(&self, raw: &str) -> String {
        join_tokens(&self.tokenize(raw))
    }

    pub fn encode_line(&self, raw: &str) -> String {
        let ids: Vec<String> = self.encode(raw).iter().map(u32::to_string).collect();
        ids.join(" ")
    }

    pub fn detokenize<S: AsRef<str>>(&self, tokens: &[S]) -> Result<String, DetokenizeError> {
        detokenize(tokens, &self.vocab.meta().registry())
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String, DetokenizeError> {
        let tokens = ids
            .iter()
            .map(|&id| {
                self.vocab
                    .rendered_token(id)
                    .ok_or(DetokenizeError::UnknownId(id))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.detokenize(&tokens)
    }
}

fn join_tokens(tokens: &[RenderedToken]) -> String {
    let parts: Vec<&str> = tokens.iter().map(RenderedToken::as_str).collect();
    parts.join(" ")
}

/// Rebuilds normalized text: each leading token opens a word, trailing tokens
/// extend it, and words and sentence stops are joined by single spaces.
/// Special tokens carry no text and are skipped.
pub fn detokenize<S: AsRef<str>>(
    tokens: &[S],
    registry: &TokenRegistry,
) -> Result<String, DetokenizeError> {
    enum Piece {
        Word(Vec<u8>),
        Stop(char),
    }
    let mut pieces: Vec<Piece> = Vec::new();
    let mut open_word = false;
    for raw in tokens {
        let raw = raw.as_ref();
        match parse_token(raw, registry)? {
            ByteToken::Bytes {
                bytes,
                position: Position::Leading,
            } => {
                pieces.push(Piece::Word(bytes));
                open_word = true;
            }
            ByteToken::Bytes {
                bytes,
                position: Position::Trailing,
            } => match pieces.last_mut() {
                Some(Piece::Word(w)) if open_word => w.extend_from_slice(&bytes),
                _ => {
                    return Err(DetokenizeError::OrphanTrailing {
                        token: raw.to_string(),
                    })
                }
            },
            ByteToken::SentenceStop(c) => {
                pieces.push(Piece::Stop(c));
                open_word = false;
            }
            ByteToken::Special(_) => open_word = false,
        }
    }
    let mut out = String::new();
    for (i, piece) in pieces.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match piece {
            Piece::Word(bytes) => {
                let text = String::from_utf8(bytes)
                    .map_err(|_| DetokenizeError::InvalidUtf8 { word: i })?;
                out.push_str(&text);
            }
            Piece::Stop(c) => out.push(c),
        }
    }
    Ok(out)
}

/// True when no output token is `[UNK]` and every token is a vocab entry.
pub fn is_in_vocab(tokenizer: &Tokenizer, tokens: &[RenderedToken]) -> bool {
    let vocab = tokenizer.vocab();
    tokens.iter().all(|t| {
        let lookup = if tokenizer.options().wbl_mode {
            t.as_str()
                .strip_prefix(TRAILING_PREFIX)
                .unwrap_or(t.as_str())
        } else {
            t.as_str()
        };
        match vocab.id_of(lookup) {
            Some(id) => vocab.token(id).map(|x| x.kind()) != Some(TokenKind::Special),
            None => false,
        }
    })
}
