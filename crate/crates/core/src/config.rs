//! Flat `key = value` configuration files.
//!
//! Lines starting with `#` are comments. Environment variables named
//! `BBPE_<KEY>` (upper case, `.` replaced by `_`) override file values.
//!
//! ```text
//! vocab_size = 100000
//! min_pair_frequency = 2
//! distinguish_leading = true
//! cjk_ranges = 4E00-9FFF 3400-4DBF
//! corpus.en = data/en.txt
//! corpus.th = data/th_a.txt, data/th_b.txt
//! alpha = 0.5
//! script.Cyrillic = cyrillic
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::ScriptMap;
use crate::corpus::{CorpusSpec, LanguageSource, DEFAULT_ALPHA, DEFAULT_SEED};
use crate::preprocess::PreprocessConfig;
use crate::trainer::TrainerConfig;
use crate::vocab::parse_hex_range;

pub const ENV_PREFIX: &str = "BBPE_";

const KNOWN_KEYS: [&str; 12] = [
    "vocab_size",
    "min_pair_frequency",
    "distinguish_leading",
    "max_token_bytes",
    "specials",
    "sentence_stops",
    "cjk_ranges",
    "nfc",
    "symbols_as_punctuation",
    "alpha",
    "seed",
    "threads",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("config key {key:?}: {reason}")]
    Value { key: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
    base_dir: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    reason: "empty key".into(),
                });
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Config {
            entries,
            base_dir: None,
        })
    }

    /// Reads a file; relative corpus paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Config::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    fn env_name(key: &str) -> String {
        format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase())
    }

    /// Applies `BBPE_*` overrides for known keys and keys already present.
    pub fn apply_env<I, K, V>(&mut self, vars: I)
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        let mut candidates: BTreeMap<String, String> = KNOWN_KEYS
            .iter()
            .map(|k| (Config::env_name(k), k.to_string()))
            .collect();
        for key in self.entries.keys() {
            candidates.insert(Config::env_name(key), key.clone());
        }
        for (name, value) in vars {
            if let Some(key) = candidates.get(name.as_ref()) {
                self.entries.insert(key.clone(), value.into());
            }
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|e: T::Err| ConfigError::Value {
                    key: key.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig, ConfigError> {
        let mut cfg = PreprocessConfig::default();
        if let Some(v) = self.get("sentence_stops") {
            cfg.sentence_stops = v
                .split_whitespace()
                .map(|w| {
                    let mut cs = w.chars();
                    match (cs.next(), cs.next()) {
                        (Some(c), None) => Ok(c),
                        _ => Err(ConfigError::Value {
                            key: "sentence_stops".into(),
                            reason: format!("{w:?} is not a single character"),
                        }),
                    }
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = self.get("cjk_ranges") {
            cfg.cjk_ranges = v
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|w| !w.is_empty())
                .map(|w| {
                    parse_hex_range(w).ok_or_else(|| ConfigError::Value {
                        key: "cjk_ranges".into(),
                        reason: format!("bad range {w:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = self.parsed("nfc")? {
            cfg.nfc = v;
        }
        if let Some(v) = self.parsed("symbols_as_punctuation")? {
            cfg.symbols_as_punctuation = v;
        }
        Ok(cfg)
    }

    pub fn trainer_config(&self) -> Result<TrainerConfig, ConfigError> {
        let mut cfg = TrainerConfig {
            preprocess: self.preprocess_config()?,
            ..Default::default()
        };
        if let Some(v) = self.parsed("vocab_size")? {
            cfg.vocab_size = v;
        }
        if let Some(v) = self.parsed("min_pair_frequency")? {
            cfg.min_pair_frequency = v;
        }
        if let Some(v) = self.parsed("distinguish_leading")? {
            cfg.distinguish_leading = v;
        }
        if let Some(v) = self.parsed("max_token_bytes")? {
            cfg.max_token_bytes = v;
        }
        if let Some(v) = self.get("specials") {
            cfg.specials = v.split_whitespace().map(str::to_string).collect();
        }
        Ok(cfg)
    }

    /// Languages from `corpus.<lang>` keys, comma-separated paths each.
    pub fn corpus_spec(&self) -> Result<CorpusSpec, ConfigError> {
        let mut languages = Vec::new();
        for (key, value) in &self.entries {
            let Some(lang) = key.strip_prefix("corpus.") else {
                continue;
            };
            let paths = value
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| match &self.base_dir {
                    Some(base) if Path::new(p).is_relative() => base.join(p),
                    _ => PathBuf::from(p),
                })
                .collect();
            languages.push(LanguageSource {
                language: lang.to_string(),
                paths,
            });
        }
        let spec = CorpusSpec {
            languages,
            alpha: self.parsed("alpha")?.unwrap_or(DEFAULT_ALPHA),
            seed: self.parsed("seed")?.unwrap_or(DEFAULT_SEED),
        };
        spec.validate().map_err(|e| ConfigError::Value {
            key: "alpha".into(),
            reason: e.to_string(),
        })?;
        Ok(spec)
    }

    pub fn script_map(&self) -> ScriptMap {
        let mut map = ScriptMap::new();
        for (key, value) in &self.entries {
            if let Some(script) = key.strip_prefix("script.") {
                map.insert(script, value);
            }
        }
        map
    }
}
