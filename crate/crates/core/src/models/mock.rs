//! Deterministic, offline model backends.
//!
//! Outputs depend only on the input text (and a fixed salt), never on process
//! state, so fixtures are byte-identical across runs.

use std::collections::{BTreeMap, BTreeSet};

use super::{finish_embedding, Embedder, EmbeddingVector, GenerationParams, Generator};
use crate::answer::{ANSWER_TEMPLATE_HEADER, REFUSAL_MARKER};
use crate::error::{Error, Result};
use crate::query::QUERY_TEMPLATE_HEADER;
use crate::text::{fnv1a64, metric_tokens};

/// Signed feature hashing of metric tokens, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    id: String,
    dim: usize,
    salt: String,
}

impl HashEmbedder {
    pub fn new(id: impl Into<String>, dim: usize, salt: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            dim: dim.max(1),
            salt: salt.into(),
        }
    }

    fn bucket(&self, token: &str) -> (usize, f64) {
        let mut key = Vec::with_capacity(self.salt.len() + token.len() + 1);
        key.extend_from_slice(self.salt.as_bytes());
        key.push(0x1f);
        key.extend_from_slice(token.as_bytes());
        let h = fnv1a64(&key);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.dim as u64) as usize, sign)
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::Validation("cannot embed empty text".into()));
        }
        let mut values = vec![0.0; self.dim];
        for token in metric_tokens(text) {
            let (i, s) = self.bucket(&token);
            values[i] += s;
        }
        if values.iter().all(|v| *v == 0.0) {
            // Only punctuation, or hash collisions cancelled out.
            let (i, _) = self.bucket(text.trim());
            values[i] = 1.0;
        }
        finish_embedding(values, self.dim, &self.id)
    }
}

/// Fixed text → vector lookup, falling back to an inner embedder.
/// Lets tests pin exact geometry for specific inputs.
pub struct TableEmbedder {
    id: String,
    table: BTreeMap<String, EmbeddingVector>,
    fallback: Box<dyn Embedder>,
}

impl TableEmbedder {
    pub fn new(id: impl Into<String>, fallback: Box<dyn Embedder>) -> Self {
        Self {
            id: id.into(),
            table: BTreeMap::new(),
            fallback,
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let v = finish_embedding(values, self.fallback.dim(), &self.id)?;
        self.table.insert(text.into(), v);
        Ok(())
    }

    pub fn with(mut self, text: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(text, values)?;
        Ok(self)
    }
}

impl Embedder for TableEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.fallback.dim()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        match self.table.get(text) {
            Some(v) => Ok(v.clone()),
            None => self.fallback.embed(text),
        }
    }
}

/// Canned-template generator keyed by the prompt header.
///
/// * query prompts → `"How do I resolve <first case words>? ..."` plus a
///   trailing sentence, so first-question truncation is exercised;
/// * answer prompts → the opening of the context sharing the most content
///   words with the question, or the refusal sentence when none shares two.
///
/// Overrides registered with [`MockGenerator::with_response`] win when their
/// key occurs in the prompt.
#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    overrides: Vec<(String, String)>,
}

const QUERY_WORDS: usize = 14;
const ANSWER_WORDS: usize = 40;
const MIN_SHARED_WORDS: usize = 2;

impl MockGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_response(
        mut self,
        prompt_contains: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        self.overrides
            .push((prompt_contains.into(), response.into()));
        self
    }

    fn query_completion(prompt: &str) -> String {
        let case = prompt
            .split_once("Case:\n")
            .map(|(_, c)| c)
            .unwrap_or(prompt);
        let words: Vec<String> = metric_tokens(case).into_iter().take(QUERY_WORDS).collect();
        if words.is_empty() {
            return "How do I resolve this issue? More detail may help.".into();
        }
        format!(
            "How do I resolve {}? Please also share any relevant logs.",
            words.join(" ")
        )
    }

    fn answer_completion(prompt: &str) -> String {
        let question = prompt
            .lines()
            .find_map(|l| l.strip_prefix("Question: "))
            .unwrap_or("");
        let wanted: BTreeSet<String> = metric_tokens(question)
            .into_iter()
            .filter(|t| t.len() > 3)
            .collect();
        let mut best: Option<(usize, usize, &str)> = None;
        for line in prompt.lines() {
            let Some(rest) = line.strip_prefix("[Context ") else {
                continue;
            };
            let Some((n, body)) = rest.split_once("] ") else {
                continue;
            };
            let n: usize = n.parse().unwrap_or(0);
            let have: BTreeSet<String> = metric_tokens(body).into_iter().collect();
            let shared = wanted.intersection(&have).count();
            if best.is_none_or(|(s, _, _)| shared > s) {
                best = Some((shared, n, body));
            }
        }
        match best {
            Some((shared, n, body)) if shared >= MIN_SHARED_WORDS => {
                let opening: Vec<&str> = body.split_whitespace().take(ANSWER_WORDS).collect();
                format!("Based on context {n}: {}", opening.join(" "))
            }
            _ => REFUSAL_MARKER.to_string(),
        }
    }
}

impl Generator for MockGenerator {
    fn id(&self) -> &str {
        "mock-generator"
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String> {
        params.validate()?;
        if prompt.trim().is_empty() {
            return Err(Error::Validation("empty prompt".into()));
        }
        let text = if let Some((_, r)) = self
            .overrides
            .iter()
            .find(|(k, _)| prompt.contains(k.as_str()))
        {
            r.clone()
        } else if prompt.starts_with(QUERY_TEMPLATE_HEADER) {
            Self::query_completion(prompt)
        } else if prompt.starts_with(ANSWER_TEMPLATE_HEADER) {
            Self::answer_completion(prompt)
        } else {
            format!(
                "Echo: {}",
                prompt
                    .split_whitespace()
                    .take(ANSWER_WORDS)
                    .collect::<Vec<_>>()
                    .join(" ")
            )
        };
        if text.trim().is_empty() {
            return Err(Error::Generation("empty completion".into()));
        }
        Ok(text)
    }
}
