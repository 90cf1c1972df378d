//! Pipeline configuration.
//!
//! Every tunable constant of the pipeline lives in [`PipelineConfig`] so that
//! evaluation sweeps can vary them. The on-disk form is flat `key = value`
//! text whose keys are exactly the field names.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw, unvalidated key/value pairs as read from a config file.
pub type RawConfig = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub single_turn_threshold: f64,
    pub per_collection_k: usize,
    pub final_k: usize,
    pub chunk_size_tokens: usize,
    pub chunk_overlap_tokens: usize,
    pub n_contexts: usize,
    pub link_identity_rouge1_threshold: f64,
    pub embedding_dim: usize,
}

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            single_turn_threshold: 0.1,
            per_collection_k: 3,
            final_k: 3,
            chunk_size_tokens: 2500,
            chunk_overlap_tokens: 250,
            n_contexts: 3,
            link_identity_rouge1_threshold: 0.90,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

const KEYS: [&str; 8] = [
    "single_turn_threshold",
    "per_collection_k",
    "final_k",
    "chunk_size_tokens",
    "chunk_overlap_tokens",
    "n_contexts",
    "link_identity_rouge1_threshold",
    "embedding_dim",
];

fn parse_field<T: FromStr>(raw: &RawConfig, key: &str, default: T, errors: &mut Vec<String>) -> T {
    match raw.get(key) {
        None => default,
        Some(v) => v.trim().parse().unwrap_or_else(|_| {
            errors.push(format!("{key}: cannot parse {v:?}"));
            default
        }),
    }
}

/// Builds a config from raw pairs, filling defaults for missing keys.
///
/// All violations are collected and reported together, each prefixed by the
/// offending field name.
pub fn validate_config(raw: &RawConfig) -> Result<PipelineConfig> {
    let mut errors = Vec::new();
    for key in raw.keys() {
        if !KEYS.contains(&key.as_str()) {
            errors.push(format!("{key}: unknown key"));
        }
    }
    let d = PipelineConfig::default();
    let cfg = PipelineConfig {
        single_turn_threshold: parse_field(raw, KEYS[0], d.single_turn_threshold, &mut errors),
        per_collection_k: parse_field(raw, KEYS[1], d.per_collection_k, &mut errors),
        final_k: parse_field(raw, KEYS[2], d.final_k, &mut errors),
        chunk_size_tokens: parse_field(raw, KEYS[3], d.chunk_size_tokens, &mut errors),
        chunk_overlap_tokens: parse_field(raw, KEYS[4], d.chunk_overlap_tokens, &mut errors),
        n_contexts: parse_field(raw, KEYS[5], d.n_contexts, &mut errors),
        link_identity_rouge1_threshold: parse_field(
            raw,
            KEYS[6],
            d.link_identity_rouge1_threshold,
            &mut errors,
        ),
        embedding_dim: parse_field(raw, KEYS[7], d.embedding_dim, &mut errors),
    };
    errors.extend(cfg.violations());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

impl PipelineConfig {
    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let t = self.single_turn_threshold;
        if !(t > 0.0 && t < 1.0) {
            v.push(format!("single_turn_threshold: must be in (0, 1), got {t}"));
        }
        if self.per_collection_k < 1 {
            v.push("per_collection_k: must be >= 1".into());
        }
        if self.final_k < 1 {
            v.push("final_k: must be >= 1".into());
        }
        if self.chunk_size_tokens < 1 {
            v.push("chunk_size_tokens: must be >= 1".into());
        }
        if self.chunk_overlap_tokens >= self.chunk_size_tokens {
            v.push(format!(
                "chunk_overlap_tokens: overlap must be < size ({} >= {})",
                self.chunk_overlap_tokens, self.chunk_size_tokens
            ));
        }
        if self.n_contexts < 1 {
            v.push("n_contexts: must be >= 1".into());
        }
        let r = self.link_identity_rouge1_threshold;
        if !(r > 0.0 && r <= 1.0) {
            v.push(format!(
                "link_identity_rouge1_threshold: must be in (0, 1], got {r}"
            ));
        }
        if self.embedding_dim < 1 {
            v.push("embedding_dim: must be >= 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        validate_config(&parse_kv(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_raw(&self) -> RawConfig {
        let values = [
            self.single_turn_threshold.to_string(),
            self.per_collection_k.to_string(),
            self.final_k.to_string(),
            self.chunk_size_tokens.to_string(),
            self.chunk_overlap_tokens.to_string(),
            self.n_contexts.to_string(),
            self.link_identity_rouge1_threshold.to_string(),
            self.embedding_dim.to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }
}

impl fmt::Display for PipelineConfig {
    /// Writes the flat `key = value` form accepted by [`PipelineConfig::from_kv_str`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let raw = self.to_raw();
        for key in KEYS {
            writeln!(f, "{key} = {}", raw[key])?;
        }
        Ok(())
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: "config".into(),
                line: i + 1,
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        raw.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(raw)
}
