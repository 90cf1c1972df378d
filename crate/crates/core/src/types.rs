//! Shared domain types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportCase {
    pub case_id: String,
    pub subject: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub product_name: String,
    #[serde(default)]
    pub product_version: String,
    /// Filled by preprocessing; empty until then.
    #[serde(default)]
    pub cleaned_text: String,
}

impl SupportCase {
    pub fn new(
        case_id: impl Into<String>,
        subject: impl Into<String>,
        description: impl Into<String>,
    ) -> Self {
        Self {
            case_id: case_id.into(),
            subject: subject.into(),
            description: description.into(),
            product_name: String::new(),
            product_version: String::new(),
            cleaned_text: String::new(),
        }
    }

    pub fn with_product(mut self, name: impl Into<String>, version: impl Into<String>) -> Self {
        self.product_name = name.into();
        self.product_version = version.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.case_id.trim().is_empty() {
            return Err(Error::Validation("case_id must be nonempty".into()));
        }
        if self.subject.trim().is_empty() {
            return Err(Error::Validation("subject must be nonempty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnLabel {
    SingleTurn,
    MultiTurn,
}

impl TurnLabel {
    pub fn is_single_turn(self) -> bool {
        self == TurnLabel::SingleTurn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationStatus {
    /// Every result carries a generated answer.
    Ok,
    /// Classifier gated the case as needing more customer interaction.
    NotSingleTurn,
    /// At least one answer succeeded and at least one failed.
    Partial,
    /// Retrieval produced nothing to answer from.
    NoResults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResult {
    pub url: String,
    pub title: String,
    pub answer_text: String,
    pub insufficient_context: bool,
    pub rerank_score: f64,
    pub status: ResultStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub case_id: String,
    pub status: RecommendationStatus,
    pub single_turn_score: f64,
    pub query_text: String,
    /// Sorted by `rerank_score` descending, at most `final_k` long.
    pub results: Vec<RecommendationResult>,
    pub query_template: String,
    pub answer_template: String,
}
