use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::{links_match, DocumentRecord};
use crate::rouge::rouge_l_f1;
use crate::text::metric_tokens;

/// ROUGE-L F1 over metric tokens of two texts.
pub fn rouge_l_text(candidate: &str, reference: &str) -> f64 {
    rouge_l_f1(&metric_tokens(candidate), &metric_tokens(reference))
}

/// 1-based rank of the first result matching any ground-truth link.
pub fn first_hit_rank<D: AsRef<DocumentRecord>>(
    ranked: &[D],
    gt_links: &[D],
    threshold: f64,
) -> Option<usize> {
    ranked
        .iter()
        .position(|r| {
            gt_links
                .iter()
                .any(|g| links_match(r.as_ref(), g.as_ref(), threshold))
        })
        .map(|i| i + 1)
}

/// Whether any of the top `n` results matches any ground-truth link.
pub fn recall_at_n<D: AsRef<DocumentRecord>>(
    ranked: &[D],
    gt_links: &[D],
    n: usize,
    threshold: f64,
) -> Result<bool> {
    if gt_links.is_empty() {
        return Err(Error::Validation(
            "recall needs at least one ground-truth link".into(),
        ));
    }
    Ok(first_hit_rank(&ranked[..ranked.len().min(n)], gt_links, threshold).is_some())
}

/// Hits over cases, one entry per case with ground-truth links.
pub fn aggregate_recall(hit_ranks: &[Option<usize>], n: usize) -> f64 {
    if hit_ranks.is_empty() {
        return 0.0;
    }
    let hits = hit_ranks
        .iter()
        .filter(|r| r.is_some_and(|r| r <= n))
        .count();
    hits as f64 / hit_ranks.len() as f64
}

pub const RUBRIC_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

pub fn rubric_average(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Validation("rubric needs at least one score".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !RUBRIC_LEVELS.contains(s)) {
        return Err(Error::Validation(format!(
            "rubric score {bad} is not one of 0, 0.25, 0.5, 0.75, 1"
        )));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Share of items on which all three annotators agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub proportion: f64,
    pub items: usize,
}

impl fmt::Display for Agreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ({})", self.proportion, self.items)
    }
}

pub fn agreement_proportion<L: PartialEq>(annotations: &[Vec<L>]) -> Result<Agreement> {
    if annotations.is_empty() {
        return Err(Error::Validation("no annotated items".into()));
    }
    let mut unanimous = 0;
    for (i, labels) in annotations.iter().enumerate() {
        if labels.len() != 3 {
            return Err(Error::Validation(format!(
                "item {i} has {} labels, expected 3",
                labels.len()
            )));
        }
        if labels[0] == labels[1] && labels[1] == labels[2] {
            unanimous += 1;
        }
    }
    Ok(Agreement {
        proportion: unanimous as f64 / annotations.len() as f64,
        items: annotations.len(),
    })
}
