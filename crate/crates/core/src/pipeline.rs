//! End-to-end recommendation for one case.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::answer::{generate_answer, Answer, ANSWER_TEMPLATE_VERSION};
use crate::classifier::{classify, TurnScorer};
use crate::config::PipelineConfig;
use crate::error::Error;
use crate::models::{GenerationParams, ModelSet};
use crate::preprocess::{preprocess_case, ProductAliasTable};
use crate::query::{generate_query, Query, QUERY_TEMPLATE_VERSION};
use crate::retrieval::{retrieve, ExactSearch, Index, RetrievalOutcome, ScoredDoc, VectorSearch};
use crate::types::{
    Recommendation, RecommendationResult, RecommendationStatus, ResultStatus, SupportCase,
    TurnLabel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preprocess,
    Classify,
    Query,
    Retrieve,
    Answer,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Preprocess => "preprocess",
            Stage::Classify => "classify",
            Stage::Query => "query",
            Stage::Retrieve => "retrieve",
            Stage::Answer => "answer",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for crate::error::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Everything produced while processing one case.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub case: SupportCase,
    pub single_turn_score: f64,
    pub predicted: TurnLabel,
    pub query: Option<Query>,
    pub retrieval: Option<RetrievalOutcome>,
    /// Parallel to `retrieval.docs`.
    pub answers: Vec<Result<Answer, String>>,
}

#[derive(Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    pub models: ModelSet,
    pub scorer: Arc<dyn TurnScorer>,
    pub index: Arc<Index>,
    pub aliases: Arc<ProductAliasTable>,
    pub search: Arc<dyn VectorSearch>,
    pub generation: GenerationParams,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        models: ModelSet,
        scorer: Arc<dyn TurnScorer>,
        index: Arc<Index>,
    ) -> crate::error::Result<Self> {
        config.validate()?;
        index.check_compatible(models.base.as_ref())?;
        Ok(Self {
            config,
            models,
            scorer,
            index,
            aliases: Arc::new(ProductAliasTable::default()),
            search: Arc::new(ExactSearch),
            generation: GenerationParams::default(),
        })
    }

    pub fn with_aliases(mut self, aliases: ProductAliasTable) -> Self {
        self.aliases = Arc::new(aliases);
        self
    }

    pub fn with_search(mut self, search: Arc<dyn VectorSearch>) -> Self {
        self.search = search;
        self
    }

    /// Preprocesses and scores a case without going further.
    pub fn classify(
        &self,
        case: &SupportCase,
    ) -> Result<(SupportCase, f64, TurnLabel), StageError> {
        let case = preprocess_case(case).at(Stage::Preprocess)?;
        let score = self.scorer.score(&case.cleaned_text).at(Stage::Classify)?;
        Ok((
            case,
            score,
            classify(score, self.config.single_turn_threshold),
        ))
    }

    pub fn query(&self, case: &SupportCase) -> Result<Query, StageError> {
        generate_query(case, self.models.generator.as_ref(), &self.generation).at(Stage::Query)
    }

    /// Retrieval for an already preprocessed case, with `config` overriding
    /// the pipeline's own depth settings.
    pub fn retrieve(
        &self,
        case: &SupportCase,
        query: &Query,
        config: &PipelineConfig,
    ) -> Result<RetrievalOutcome, StageError> {
        retrieve(
            case,
            query,
            &self.index,
            &self.models,
            &self.aliases,
            self.search.as_ref(),
            config,
        )
        .at(Stage::Retrieve)
    }

    /// One answer per document, generated concurrently, returned in input order.
    pub fn answer_all(&self, query: &Query, docs: &[ScoredDoc]) -> Vec<Result<Answer, String>> {
        std::thread::scope(|s| {
            let handles: Vec<_> = docs
                .iter()
                .map(|d| {
                    s.spawn(move || {
                        generate_answer(
                            query,
                            &d.doc,
                            self.models.reranker.as_ref(),
                            self.models.generator.as_ref(),
                            &self.config,
                            &self.generation,
                        )
                        .map_err(|e| e.to_string())
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err("answer worker panicked".into()))
                })
                .collect()
        })
    }

    /// Runs every stage. With `gate` false, multi-turn predictions still go
    /// through query, retrieval and answers.
    pub fn run(&self, case: &SupportCase, gate: bool) -> Result<CaseRun, StageError> {
        let (case, score, predicted) = self.classify(case)?;
        let mut run = CaseRun {
            case,
            single_turn_score: score,
            predicted,
            query: None,
            retrieval: None,
            answers: Vec::new(),
        };
        if gate && !predicted.is_single_turn() {
            return Ok(run);
        }
        let query = self.query(&run.case)?;
        let outcome = self.retrieve(&run.case, &query, &self.config)?;
        if let Some(w) = &outcome.warning {
            log::warn!("case {}: {w}", run.case.case_id);
        }
        run.answers = self.answer_all(&query, &outcome.docs);
        run.query = Some(query);
        run.retrieval = Some(outcome);
        Ok(run)
    }

    pub fn recommend(&self, case: &SupportCase) -> Result<Recommendation, StageError> {
        self.run(case, true)?.to_recommendation()
    }
}

impl CaseRun {
    /// Fails at the answer stage only when every answer failed.
    pub fn to_recommendation(&self) -> Result<Recommendation, StageError> {
        let run = self;
        let mut rec = Recommendation {
            case_id: run.case.case_id.clone(),
            status: RecommendationStatus::Ok,
            single_turn_score: run.single_turn_score,
            query_text: run
                .query
                .as_ref()
                .map(|q| q.text.clone())
                .unwrap_or_default(),
            results: Vec::new(),
            query_template: QUERY_TEMPLATE_VERSION.into(),
            answer_template: ANSWER_TEMPLATE_VERSION.into(),
        };
        if !run.predicted.is_single_turn() {
            rec.status = RecommendationStatus::NotSingleTurn;
            return Ok(rec);
        }
        let docs = run
            .retrieval
            .as_ref()
            .map(|r| r.docs.as_slice())
            .unwrap_or_default();
        if docs.is_empty() {
            rec.status = RecommendationStatus::NoResults;
            return Ok(rec);
        }
        for (d, a) in docs.iter().zip(&run.answers) {
            rec.results.push(match a {
                Ok(a) => RecommendationResult {
                    url: d.doc.url.clone(),
                    title: d.doc.title.clone(),
                    answer_text: a.answer_text.clone(),
                    insufficient_context: a.insufficient_context,
                    rerank_score: d.score,
                    status: ResultStatus::Ok,
                    error: None,
                },
                Err(e) => RecommendationResult {
                    url: d.doc.url.clone(),
                    title: d.doc.title.clone(),
                    answer_text: String::new(),
                    insufficient_context: false,
                    rerank_score: d.score,
                    status: ResultStatus::Failed,
                    error: Some(e.clone()),
                },
            });
        }
        let failed = rec
            .results
            .iter()
            .filter(|r| r.status == ResultStatus::Failed)
            .count();
        if failed == rec.results.len() {
            let detail = rec.results[0].error.clone().unwrap_or_default();
            return Err(StageError {
                stage: Stage::Answer,
                source: Error::Generation(format!("all {failed} answers failed; first: {detail}")),
            });
        }
        if failed > 0 {
            rec.status = RecommendationStatus::Partial;
        }
        Ok(rec)
    }
}
