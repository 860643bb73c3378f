//! Multilingual corpus ingestion and balancing.
//!
//! Each language contributes plain UTF-8 files with one document per line.
//! Low-resource languages are repeated so that sampling proportions follow
//! `q_l ∝ p_l^alpha`, where `p_l` is the language's share of lines.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_SEED: u64 = 0x6262_7065;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("language {0:?} has no lines")]
    EmptyLanguage(String),
    #[error("language {0:?} is not in the corpus spec")]
    UnknownLanguage(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageSource {
    pub language: String,
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub languages: Vec<LanguageSource>,
    pub alpha: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(languages: Vec<LanguageSource>) -> Self {
        CorpusSpec {
            languages,
            alpha: DEFAULT_ALPHA,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CorpusError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LanguageStats {
    pub lines: u64,
    /// UTF-8 bytes of line content, excluding line terminators.
    pub bytes: u64,
}

/// Reads a file and splits it into lines after mapping CRLF and CR to LF.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(split_normalized_lines(&text))
}

fn split_normalized_lines(text: &str) -> Vec<String> {
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    let body = text.strip_suffix('\n').unwrap_or(&text);
    if body.is_empty() {
        return Vec::new();
    }
    body.split('\n').map(str::to_string).collect()
}

fn language_lines(source: &LanguageSource) -> Result<Vec<String>, CorpusError> {
    let mut lines = Vec::new();
    for path in &source.paths {
        lines.extend(read_lines(path)?);
    }
    Ok(lines)
}

pub fn measure(spec: &CorpusSpec) -> Result<BTreeMap<String, LanguageStats>, CorpusError> {
    let mut out = BTreeMap::new();
    for source in &spec.languages {
        let lines = language_lines(source)?;
        let stats = out
            .entry(source.language.clone())
            .or_insert_with(LanguageStats::default);
        stats.lines += lines.len() as u64;
        stats.bytes += lines.iter().map(|l| l.len() as u64).sum::<u64>();
    }
    Ok(out)
}

/// Repetition factor per language, scaled so the smallest factor is 1.
///
/// With `q_l ∝ p_l^alpha` the factor `q_l / p_l` is proportional to
/// `p_l^(alpha - 1)`, so the largest language keeps factor 1.
pub fn upsample_plan(
    counts: &BTreeMap<String, u64>,
    alpha: f64,
) -> Result<BTreeMap<String, f64>, CorpusError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CorpusError::InvalidAlpha(alpha));
    }
    if let Some((lang, _)) = counts.iter().find(|(_, &n)| n == 0) {
        return Err(CorpusError::EmptyLanguage(lang.clone()));
    }
    let Some(&largest) = counts.values().max() else {
        return Ok(BTreeMap::new());
    };
    Ok(counts
        .iter()
        .map(|(lang, &n)| {
            let factor = (largest as f64 / n as f64).powf(1.0 - alpha);
            (lang.clone(), factor)
        })
        .collect())
}

/// Lines of a language and how many times each is emitted.
fn emission_counts(n_lines: usize, factor: f64, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let whole = factor.floor() as u32;
    let extra = ((factor - factor.floor()) * n_lines as f64).round() as usize;
    let mut counts = vec![whole; n_lines];
    let mut order: Vec<usize> = (0..n_lines).collect();
    order.shuffle(rng);
    for &i in order.iter().take(extra.min(n_lines)) {
        counts[i] += 1;
    }
    counts
}

/// The balanced, shuffled training stream.
///
/// Every line appears `floor(factor)` times; `round(n * frac(factor))` lines
/// chosen by the seeded generator appear once more. The final order is a
/// seeded shuffle, so the same spec and seed give the same stream.
pub fn stream(spec: &CorpusSpec, plan: &BTreeMap<String, f64>) -> Result<Vec<String>, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut by_language: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for source in &spec.languages {
        by_language
            .entry(source.language.as_str())
            .or_default()
            .extend(language_lines(source)?);
    }
    let mut out = Vec::new();
    for (lang, lines) in &by_language {
        let factor = *plan
            .get(*lang)
            .ok_or_else(|| CorpusError::UnknownLanguage(lang.to_string()))?;
        let counts = emission_counts(lines.len(), factor, &mut rng);
        for (line, &times) in lines.iter().zip(&counts) {
            for _ in 0..times {
                out.push(line.clone());
            }
        }
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Lines `i` with `i % count == index`; shards partition the stream.
pub fn shard<T>(items: &[T], index: usize, count: usize) -> impl Iterator<Item = &T> {
    items
        .iter()
        .enumerate()
        .filter(move |(i, _)| count > 0 && i % count == index)
        .map(|(_, item)| item)
}

/// Measures, plans and streams in one call.
pub fn balanced_stream(spec: &CorpusSpec) -> Result<Vec<String>, CorpusError> {
    let stats = measure(spec)?;
    let counts = stats
        .iter()
        .filter(|(_, s)| s.lines > 0)
        .map(|(l, s)| (l.clone(), s.lines))
        .collect();
    let mut plan = upsample_plan(&counts, spec.alpha)?;
    for (lang, s) in &stats {
        if s.lines == 0 {
            plan.insert(lang.clone(), 1.0);
        }
    }
    stream(spec, &plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn lines(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag} line {i}\n")).collect()
    }

    fn spec(dir: &Path, sizes: &[(&str, usize)]) -> CorpusSpec {
        CorpusSpec::new(
            sizes
                .iter()
                .map(|&(lang, n)| LanguageSource {
                    language: lang.to_string(),
                    paths: vec![write(dir, &format!("{lang}.txt"), &lines(n, lang))],
                })
                .collect(),
        )
    }

    #[test]
    fn measures_lines_and_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), &[("l1", 10), ("l2", 20)]);
        let m = measure(&s).unwrap();
        assert_eq!(m["l1"].lines, 10);
        assert_eq!(m["l2"].lines, 20);
        assert_eq!(
            m["l1"].bytes,
            (0..10).map(|i| format!("l1 line {i}").len() as u64).sum()
        );
    }

    #[test]
    fn empty_file_and_newline_conventions() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write(dir.path(), "e.txt", "");
        let mixed = write(dir.path(), "m.txt", "a\r\nb\rc\nd");
        let s = CorpusSpec::new(vec![
            LanguageSource {
                language: "e".into(),
                paths: vec![empty],
            },
            LanguageSource {
                language: "m".into(),
                paths: vec![mixed.clone()],
            },
        ]);
        let m = measure(&s).unwrap();
        assert_eq!(m["e"].lines, 0);
        assert_eq!(m["m"].lines, 4);
        assert_eq!(m["m"].bytes, 4);
        assert_eq!(read_lines(&mixed).unwrap(), ["a", "b", "c", "d"]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let s = CorpusSpec::new(vec![LanguageSource {
            language: "x".into(),
            paths: vec![PathBuf::from("/nonexistent/corpus.txt")],
        }]);
        assert!(matches!(measure(&s), Err(CorpusError::Io { .. })));
    }

    #[test]
    fn plan_examples() {
        let equal: BTreeMap<String, u64> =
            [("a".into(), 50), ("b".into(), 50)].into_iter().collect();
        for alpha in [0.1, 0.5, 1.0] {
            assert!(upsample_plan(&equal, alpha)
                .unwrap()
                .values()
                .all(|&f| f == 1.0));
        }
        let skewed: BTreeMap<String, u64> = [("small".into(), 100), ("large".into(), 10_000)]
            .into_iter()
            .collect();
        let plan = upsample_plan(&skewed, 0.5).unwrap();
        assert!((plan["small"] - 10.0).abs() < 1e-12);
        assert_eq!(plan["large"], 1.0);
        assert!(upsample_plan(&skewed, 1.0)
            .unwrap()
            .values()
            .all(|&f| f == 1.0));
        assert!(matches!(
            upsample_plan(&skewed, 0.0),
            Err(CorpusError::InvalidAlpha(_))
        ));
        assert!(matches!(
            upsample_plan(&skewed, 1.5),
            Err(CorpusError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn proportions_follow_the_exponent() {
        let counts: BTreeMap<String, u64> =
            [("a".into(), 300), ("b".into(), 1200), ("c".into(), 4500)]
                .into_iter()
                .collect();
        let alpha = 0.3;
        let plan = upsample_plan(&counts, alpha).unwrap();
        let total: f64 = counts.values().sum::<u64>() as f64;
        let emitted: BTreeMap<_, f64> = counts
            .iter()
            .map(|(l, &n)| (l, n as f64 * plan[l]))
            .collect();
        let emitted_total: f64 = emitted.values().sum();
        let z: f64 = counts
            .values()
            .map(|&n| (n as f64 / total).powf(alpha))
            .sum();
        for (l, &n) in &counts {
            let q = (n as f64 / total).powf(alpha) / z;
            assert!((emitted[l] / emitted_total - q).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_repeats_lines() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), &[("a", 5), ("b", 7)]);
        let ones: BTreeMap<String, f64> =
            [("a".into(), 1.0), ("b".into(), 1.0)].into_iter().collect();
        let out = stream(&s, &ones).unwrap();
        assert_eq!(out.len(), 12);
        let mut sorted = out.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 12);

        let twice: BTreeMap<String, f64> =
            [("a".into(), 2.0), ("b".into(), 1.0)].into_iter().collect();
        let out = stream(&s, &twice).unwrap();
        assert_eq!(out.len(), 17);
        for i in 0..5 {
            let line = format!("a line {i}");
            assert_eq!(out.iter().filter(|l| **l == line).count(), 2);
        }
    }

    #[test]
    fn fractional_factors_round_consistently() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), &[("a", 10)]);
        let plan: BTreeMap<String, f64> = [("a".into(), 1.26)].into_iter().collect();
        let out = stream(&s, &plan).unwrap();
        assert_eq!(out.len(), 10 + 3);
    }

    #[test]
    fn stream_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), &[("a", 40), ("b", 400)]);
        let first = balanced_stream(&s).unwrap();
        assert_eq!(first, balanced_stream(&s).unwrap());
        let other = CorpusSpec {
            seed: 7,
            ..s.clone()
        };
        let second = balanced_stream(&other).unwrap();
        assert_eq!(first.len(), second.len());
        assert_ne!(first, second);
    }

    #[test]
    fn shards_partition_items() {
        let items: Vec<u32> = (0..10).collect();
        let mut all: Vec<u32> = (0..3).flat_map(|i| shard(&items, i, 3).copied()).collect();
        all.sort();
        assert_eq!(all, items);
    }
}
