//! Single-turn vs multi-turn case classification.
//!
//! A logistic head over frozen embeddings. Training sees two views of every
//! case (subject+description and subject only) so the model copes with terse
//! tickets.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Embedder, EmbeddingVector};
use crate::preprocess::{clean_text, concat_case};
use crate::types::{SupportCase, TurnLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCase {
    pub text: String,
    pub label: TurnLabel,
}

impl LabeledCase {
    pub fn new(text: impl Into<String>, label: TurnLabel) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Validation(
                "labeled case text must be nonempty".into(),
            ));
        }
        Ok(Self { text, label })
    }
}

/// Subject+description view followed by the subject-only view.
pub fn augment_training_views(case: &SupportCase, label: TurnLabel) -> Result<Vec<LabeledCase>> {
    let subject = clean_text(&case.subject);
    if subject.is_empty() {
        return Err(Error::Validation(format!(
            "case {}: empty subject",
            case.case_id
        )));
    }
    let full = concat_case(&subject, &clean_text(&case.description))?;
    Ok(vec![
        LabeledCase::new(full, label)?,
        LabeledCase::new(subject, label)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 400,
            learning_rate: 4.0,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTurnModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub embedder_id: String,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearTurnModel {
    pub fn zeros(dim: usize, embedder_id: impl Into<String>) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            embedder_id: embedder_id.into(),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.weights.len() != dim {
            return Err(Error::Configuration(format!(
                "classifier has {} weights, embedder produces {dim}",
                self.weights.len()
            )));
        }
        if !self.bias.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Configuration(
                "classifier has non-finite parameters".into(),
            ));
        }
        Ok(())
    }

    pub fn probability(&self, v: &EmbeddingVector) -> Result<f64> {
        self.check(v.dim())?;
        let z: f64 = self
            .weights
            .iter()
            .zip(v.values())
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias;
        Ok(sigmoid(z))
    }
}

/// Full-batch gradient descent on mean log-loss plus `l2/2 · |w|²`, from
/// zero initialization and in data order. Same inputs, same model.
pub fn train_linear_head(
    data: &[LabeledCase],
    embedder: &dyn Embedder,
    hyper: &TrainParams,
) -> Result<LinearTurnModel> {
    if hyper.epochs == 0
        || !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0)
        || !(hyper.l2.is_finite() && hyper.l2 >= 0.0)
    {
        return Err(Error::Training(
            "epochs >= 1, learning_rate > 0 and l2 >= 0 required".into(),
        ));
    }
    let positives = data.iter().filter(|c| c.label.is_single_turn()).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::Training(
            "training data must contain both labels".into(),
        ));
    }
    let xs: Vec<EmbeddingVector> = data
        .iter()
        .map(|c| embedder.embed(&c.text))
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = data
        .iter()
        .map(|c| if c.label.is_single_turn() { 1.0 } else { 0.0 })
        .collect();
    let dim = embedder.dim();
    let n = data.len() as f64;
    let mut model = LinearTurnModel::zeros(dim, embedder.id());
    let mut grad = vec![0.0; dim];
    for _ in 0..hyper.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let err = model.probability(x)? - y;
            for (g, xi) in grad.iter_mut().zip(x.values()) {
                *g += err * xi;
            }
            grad_b += err;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= hyper.learning_rate * (g / n + hyper.l2 * *w);
        }
        model.bias -= hyper.learning_rate * grad_b / n;
    }
    Ok(model)
}

/// Anything that can estimate P(single turn) for cleaned case text.
pub trait TurnScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<f64>;
}

pub fn score_single_turn(
    text: &str,
    model: &LinearTurnModel,
    embedder: &dyn Embedder,
) -> Result<f64> {
    model.check(embedder.dim())?;
    model.probability(&embedder.embed(text)?)
}

pub struct LinearTurnScorer {
    model: LinearTurnModel,
    embedder: Arc<dyn Embedder>,
}

impl LinearTurnScorer {
    pub fn new(model: LinearTurnModel, embedder: Arc<dyn Embedder>) -> Result<Self> {
        model.check(embedder.dim())?;
        if model.embedder_id != embedder.id() {
            log::warn!(
                "classifier was trained with embedder {:?} but is scoring with {:?}",
                model.embedder_id,
                embedder.id()
            );
        }
        Ok(Self { model, embedder })
    }
}

impl TurnScorer for LinearTurnScorer {
    fn score(&self, text: &str) -> Result<f64> {
        score_single_turn(text, &self.model, self.embedder.as_ref())
    }
}

/// Fixed-probability scorer; `1.0` disables gating.
pub struct ConstantScorer(pub f64);

impl TurnScorer for ConstantScorer {
    fn score(&self, _text: &str) -> Result<f64> {
        Ok(self.0)
    }
}

/// Ties go to single turn, favoring recall.
pub fn classify(score: f64, threshold: f64) -> TurnLabel {
    if score >= threshold {
        TurnLabel::SingleTurn
    } else {
        TurnLabel::MultiTurn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Share of gold labels that are single turn.
    pub positive_rate: f64,
    pub predicted_positive_rate: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Binary metrics with single turn as the positive class.
pub fn classifier_metrics(
    predictions: &[TurnLabel],
    labels: &[TurnLabel],
) -> Result<ClassifierMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Validation("no predictions to score".into()));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (p, l) in predictions.iter().zip(labels) {
        match (p.is_single_turn(), l.is_single_turn()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    Ok(ClassifierMetrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        positive_rate: ratio(tp + fneg, labels.len()),
        predicted_positive_rate: ratio(tp + fp, labels.len()),
    })
}

/// Persisted classifier: `{weights, bias, embedder_id, threshold}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFile {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub embedder_id: String,
    pub threshold: f64,
}

impl ClassifierFile {
    pub fn new(model: LinearTurnModel, threshold: f64) -> Self {
        Self {
            weights: model.weights,
            bias: model.bias,
            embedder_id: model.embedder_id,
            threshold,
        }
    }

    pub fn model(&self) -> LinearTurnModel {
        LinearTurnModel {
            weights: self.weights.clone(),
            bias: self.bias,
            embedder_id: self.embedder_id.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if !(file.threshold > 0.0 && file.threshold < 1.0) {
            return Err(Error::Configuration(format!(
                "{}: threshold must be in (0, 1)",
                path.display()
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Training rows: JSONL `{text, label}`.
pub fn load_labeled_jsonl(path: &Path) -> Result<Vec<LabeledCase>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let row: LabeledCase = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        rows.push(LabeledCase::new(row.text, row.label).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(rows)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TrainingRow {
    Case { case: SupportCase, label: TurnLabel },
    Text(LabeledCase),
}

/// Training rows as JSONL. `{case, label}` rows expand into both training
/// views; `{text, label}` rows are taken as they are.
pub fn load_training_jsonl(path: &Path) -> Result<Vec<LabeledCase>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let row: TrainingRow = serde_json::from_str(line)
            .map_err(|_| parse_err("expected {case, label} or {text, label}".into()))?;
        match row {
            TrainingRow::Case { case, label } => rows.extend(
                augment_training_views(&case, label).map_err(|e| parse_err(e.to_string()))?,
            ),
            TrainingRow::Text(r) => {
                rows.push(LabeledCase::new(r.text, r.label).map_err(|e| parse_err(e.to_string()))?)
            }
        }
    }
    Ok(rows)
}
