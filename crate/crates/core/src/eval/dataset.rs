use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::types::{SupportCase, TurnLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub case: SupportCase,
    #[serde(deserialize_with = "label_or_bool")]
    pub gt_single_turn: TurnLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_query: Option<String>,
    /// Acceptable answer links; any one of them counts as a hit.
    #[serde(default)]
    pub gt_links: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_answer: Option<String>,
}

fn label_or_bool<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TurnLabel, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Flag(bool),
        Label(TurnLabel),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Flag(true) => TurnLabel::SingleTurn,
        Raw::Flag(false) => TurnLabel::MultiTurn,
        Raw::Label(l) => l,
    })
}

impl EvalCase {
    pub fn validate(&self) -> Result<()> {
        self.case.validate()?;
        if !self.gt_single_turn.is_single_turn()
            && (self.gt_query.is_some() || self.gt_answer.is_some() || !self.gt_links.is_empty())
        {
            return Err(Error::Validation(format!(
                "case {}: ground-truth query, links and answer are only allowed on single-turn cases",
                self.case.case_id
            )));
        }
        Ok(())
    }
}

pub fn parse_dataset(text: &str, source: &str) -> Result<Vec<EvalCase>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        let case: EvalCase = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        case.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push(case);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<EvalCase>> {
    parse_dataset(&std::fs::read_to_string(path)?, &path.display().to_string())
}

/// One annotated item for agreement reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub item_id: String,
    /// Reporting bucket, such as a product; rows without one go to "all".
    #[serde(default)]
    pub group: Option<String>,
    pub labels: Vec<String>,
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRow>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Rubric scores as a JSON array of numbers.
pub fn load_rubric(path: &Path) -> Result<Vec<f64>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
