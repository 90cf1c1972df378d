//! Offline measurement of the pipeline against annotated cases.

mod dataset;
mod metrics;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{classifier_metrics, ClassifierMetrics};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::models::EmbeddingVector;
use crate::pipeline::{CaseRun, Pipeline, StageError};
use crate::retrieval::{links_match, DocumentRecord, Index, ScoredDoc};
use crate::text::METRIC_TOKENIZATION;
use crate::types::{RecommendationStatus, TurnLabel};

pub use dataset::{
    load_annotations, load_dataset, load_rubric, parse_dataset, AnnotationRow, EvalCase,
};
pub use metrics::{
    aggregate_recall, agreement_proportion, first_hit_rank, recall_at_n, rouge_l_text,
    rubric_average, Agreement, RUBRIC_LEVELS,
};

pub const REPORT_FORMAT: &str = "solrec-eval/v1";

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub n_values: Vec<usize>,
    /// Upper bound on concurrently evaluated cases.
    pub workers: usize,
    pub rubric_scores: Option<Vec<f64>>,
    pub annotations: Option<Vec<AnnotationRow>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_values: vec![1, 3, 5, 10],
            workers: 4,
            rubric_scores: None,
            annotations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub tokenization: String,
    pub config: BTreeMap<String, String>,
    pub cases: usize,
    /// Over every case the classifier could score.
    pub classifier: Option<ClassifierMetrics>,
    /// Production outcome per case: ok, partial, no_results, not_single_turn, failed.
    pub status_counts: BTreeMap<String, usize>,
    pub gt_single_turn_cases: usize,
    pub cases_with_gt_links: usize,
    pub cases_without_gt_links: usize,
    pub recall_at: BTreeMap<usize, f64>,
    pub first_pass_recall_at: BTreeMap<usize, f64>,
    #[serde(rename = "rougeL_mean")]
    pub rouge_l_mean: Option<f64>,
    pub rouge_l_scored: usize,
    /// Scored answers that came from the top result because no
    /// ground-truth document was served.
    pub answer_doc_mismatches: usize,
    #[serde(rename = "query_rougeL_mean")]
    pub query_rouge_l_mean: Option<f64>,
    pub rubric_mean: Option<f64>,
    pub agreement: BTreeMap<String, String>,
    pub failures: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAnswer {
    pub url: String,
    pub answer_text: Option<String>,
    pub insufficient_context: bool,
    #[serde(rename = "rougeL")]
    pub rouge_l: Option<f64>,
    pub error: Option<String>,
}

/// One line of the per-case trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub case_id: String,
    pub gt_single_turn: TurnLabel,
    pub predicted: Option<TurnLabel>,
    pub single_turn_score: Option<f64>,
    pub status: String,
    pub query: Option<String>,
    #[serde(rename = "query_rougeL")]
    pub query_rouge_l: Option<f64>,
    /// Deep ranking used for recall.
    pub ranked_links: Vec<String>,
    pub hit_rank: Option<usize>,
    pub first_pass_hit_rank: Option<usize>,
    pub answers: Vec<TraceAnswer>,
    pub scored_answer_url: Option<String>,
    pub answer_doc_mismatch: bool,
    #[serde(rename = "rougeL")]
    pub rouge_l: Option<f64>,
    pub error: Option<String>,
}

impl TraceRow {
    fn new(ec: &EvalCase) -> Self {
        Self {
            case_id: ec.case.case_id.clone(),
            gt_single_turn: ec.gt_single_turn,
            predicted: None,
            single_turn_score: None,
            status: "failed".into(),
            query: None,
            query_rouge_l: None,
            ranked_links: Vec::new(),
            hit_rank: None,
            first_pass_hit_rank: None,
            answers: Vec::new(),
            scored_answer_url: None,
            answer_doc_mismatch: false,
            rouge_l: None,
            error: None,
        }
    }
}

fn status_name(s: RecommendationStatus) -> &'static str {
    match s {
        RecommendationStatus::Ok => "ok",
        RecommendationStatus::NotSingleTurn => "not_single_turn",
        RecommendationStatus::Partial => "partial",
        RecommendationStatus::NoResults => "no_results",
    }
}

/// Indexed record for a ground-truth URL, or a URL-only stand-in.
fn resolve_gt_link(index: &Index, url: &str) -> Arc<DocumentRecord> {
    index.find_by_url(url).unwrap_or_else(|| {
        Arc::new(DocumentRecord {
            doc_id: url.to_string(),
            url: url.to_string(),
            canonical_url: None,
            title: String::new(),
            content: Vec::new(),
            collection_id: String::new(),
            embedding: EmbeddingVector::new(Vec::new()).expect("empty vector is finite"),
        })
    })
}

fn docs_of(scored: &[ScoredDoc]) -> Vec<Arc<DocumentRecord>> {
    scored.iter().map(|s| s.doc.clone()).collect()
}

fn evaluate_case(pipeline: &Pipeline, ec: &EvalCase, deep: &PipelineConfig) -> TraceRow {
    let mut row = TraceRow::new(ec);
    if let Err(e) = evaluate_into(pipeline, ec, deep, &mut row) {
        row.status = "failed".into();
        row.error = Some(e.to_string());
    }
    row
}

fn evaluate_into(
    pipeline: &Pipeline,
    ec: &EvalCase,
    deep: &PipelineConfig,
    row: &mut TraceRow,
) -> Result<(), StageError> {
    let (case, score, predicted) = pipeline.classify(&ec.case)?;
    row.predicted = Some(predicted);
    row.single_turn_score = Some(score);
    let gt_single = ec.gt_single_turn.is_single_turn();
    if !predicted.is_single_turn() {
        row.status = status_name(RecommendationStatus::NotSingleTurn).into();
        if !gt_single {
            return Ok(());
        }
    }

    let query = pipeline.query(&case)?;
    row.query = Some(query.text.clone());
    if let Some(gq) = &ec.gt_query {
        row.query_rouge_l = Some(rouge_l_text(&query.text, gq));
    }
    let production = pipeline.retrieve(&case, &query, &pipeline.config)?;
    let answers = pipeline.answer_all(&query, &production.docs);
    let run = CaseRun {
        case: case.clone(),
        single_turn_score: score,
        predicted,
        query: Some(query.clone()),
        retrieval: Some(production.clone()),
        answers: answers.clone(),
    };
    if predicted.is_single_turn() {
        row.status = status_name(run.to_recommendation()?.status).into();
    }
    if !gt_single {
        return Ok(());
    }

    let threshold = pipeline.config.link_identity_rouge1_threshold;
    let gt_docs: Vec<Arc<DocumentRecord>> = ec
        .gt_links
        .iter()
        .map(|u| resolve_gt_link(&pipeline.index, u))
        .collect();
    if !gt_docs.is_empty() {
        let deep_out = pipeline.retrieve(&case, &query, deep)?;
        let ranked = docs_of(&deep_out.docs);
        row.ranked_links = ranked.iter().map(|d| d.url.clone()).collect();
        row.hit_rank = first_hit_rank(&ranked, &gt_docs, threshold);
        row.first_pass_hit_rank =
            first_hit_rank(&docs_of(&deep_out.first_pass), &gt_docs, threshold);
    }

    for (d, a) in production.docs.iter().zip(&answers) {
        let (text, insufficient, error) = match a {
            Ok(a) => (Some(a.answer_text.clone()), a.insufficient_context, None),
            Err(e) => (None, false, Some(e.clone())),
        };
        row.answers.push(TraceAnswer {
            url: d.doc.url.clone(),
            rouge_l: match (&text, &ec.gt_answer) {
                (Some(t), Some(g)) => Some(rouge_l_text(t, g)),
                _ => None,
            },
            answer_text: text,
            insufficient_context: insufficient,
            error,
        });
    }
    if ec.gt_answer.is_some() && !production.docs.is_empty() {
        let gt_pos = production
            .docs
            .iter()
            .position(|d| gt_docs.iter().any(|g| links_match(&d.doc, g, threshold)));
        row.answer_doc_mismatch = gt_pos.is_none();
        let pick = &row.answers[gt_pos.unwrap_or(0)];
        row.scored_answer_url = Some(pick.url.clone());
        row.rouge_l = pick.rouge_l;
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs every case and aggregates. Per-case failures land in the trace and
/// the `failures` count; only invalid options abort.
pub fn evaluate_pipeline(
    dataset: &[EvalCase],
    pipeline: &Pipeline,
    options: &EvalOptions,
) -> Result<(EvalReport, Vec<TraceRow>)> {
    if options.n_values.is_empty() || options.n_values.contains(&0) {
        return Err(Error::Validation(
            "n values must be a nonempty list of positive integers".into(),
        ));
    }
    let rubric_mean = options
        .rubric_scores
        .as_deref()
        .map(rubric_average)
        .transpose()?;
    let agreement = match &options.annotations {
        None => BTreeMap::new(),
        Some(rows) => {
            let mut groups: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
            for r in rows {
                groups
                    .entry(r.group.clone().unwrap_or_else(|| "all".into()))
                    .or_default()
                    .push(r.labels.clone());
            }
            groups
                .into_iter()
                .map(|(g, items)| Ok((g, agreement_proportion(&items)?.to_string())))
                .collect::<Result<_>>()?
        }
    };

    let max_n = *options.n_values.iter().max().expect("nonempty");
    let deep = PipelineConfig {
        per_collection_k: max_n,
        final_k: max_n,
        ..pipeline.config.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::Configuration(format!("worker pool: {e}")))?;
    let trace: Vec<TraceRow> = pool.install(|| {
        use rayon::prelude::*;
        dataset
            .par_iter()
            .map(|ec| evaluate_case(pipeline, ec, &deep))
            .collect()
    });

    let mut status_counts: BTreeMap<String, usize> =
        ["ok", "partial", "no_results", "not_single_turn", "failed"]
            .iter()
            .map(|s| (s.to_string(), 0))
            .collect();
    for r in &trace {
        *status_counts.entry(r.status.clone()).or_default() += 1;
    }
    let (preds, golds): (Vec<TurnLabel>, Vec<TurnLabel>) = trace
        .iter()
        .filter_map(|r| r.predicted.map(|p| (p, r.gt_single_turn)))
        .unzip();
    let classifier = if preds.is_empty() {
        None
    } else {
        Some(classifier_metrics(&preds, &golds)?)
    };

    let single: Vec<(&EvalCase, &TraceRow)> = dataset
        .iter()
        .zip(&trace)
        .filter(|(ec, _)| ec.gt_single_turn.is_single_turn())
        .collect();
    let with_links: Vec<&TraceRow> = single
        .iter()
        .filter(|(ec, _)| !ec.gt_links.is_empty())
        .map(|(_, r)| *r)
        .collect();
    let hit_ranks: Vec<Option<usize>> = with_links.iter().map(|r| r.hit_rank).collect();
    let first_ranks: Vec<Option<usize>> =
        with_links.iter().map(|r| r.first_pass_hit_rank).collect();
    let mut n_values = options.n_values.clone();
    n_values.sort_unstable();
    n_values.dedup();

    let report = EvalReport {
        format: REPORT_FORMAT.into(),
        tokenization: METRIC_TOKENIZATION.into(),
        config: pipeline.config.to_raw(),
        cases: dataset.len(),
        classifier,
        status_counts,
        gt_single_turn_cases: single.len(),
        cases_with_gt_links: with_links.len(),
        cases_without_gt_links: single.len() - with_links.len(),
        recall_at: n_values
            .iter()
            .map(|&n| (n, aggregate_recall(&hit_ranks, n)))
            .collect(),
        first_pass_recall_at: n_values
            .iter()
            .map(|&n| (n, aggregate_recall(&first_ranks, n)))
            .collect(),
        rouge_l_mean: mean(trace.iter().filter_map(|r| r.rouge_l)),
        rouge_l_scored: trace.iter().filter(|r| r.rouge_l.is_some()).count(),
        answer_doc_mismatches: trace.iter().filter(|r| r.answer_doc_mismatch).count(),
        query_rouge_l_mean: mean(trace.iter().filter_map(|r| r.query_rouge_l)),
        rubric_mean,
        agreement,
        failures: trace.iter().filter(|r| r.error.is_some()).count(),
    };
    Ok((report, trace))
}

/// Writes the trace as JSONL from a single writer, in dataset order.
pub fn write_trace<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
