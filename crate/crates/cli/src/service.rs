//! HTTP API: case resolution, feedback capture and a health probe.

use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use serde_json::json;
use solrec_core::feedback::{AppendOutcome, FeedbackRecord, FeedbackStore};
use solrec_core::{
    Error, Pipeline, Recommendation, RecommendationStatus, Stage, StageError, SupportCase,
};

pub const DEFAULT_CACHE_ENTRIES: usize = 10_000;

#[derive(Clone)]
pub struct AppState {
    pipeline: Arc<Pipeline>,
    feedback: Arc<FeedbackStore>,
    served: Arc<Mutex<LruCache<String, Recommendation>>>,
    silent: bool,
}

impl AppState {
    pub fn new(
        pipeline: Pipeline,
        feedback: FeedbackStore,
        cache_entries: usize,
        silent: bool,
    ) -> Self {
        let cap = NonZeroUsize::new(cache_entries).unwrap_or(NonZeroUsize::MIN);
        Self {
            pipeline: Arc::new(pipeline),
            feedback: Arc::new(feedback),
            served: Arc::new(Mutex::new(LruCache::new(cap))),
            silent,
        }
    }

    pub fn feedback(&self) -> &FeedbackStore {
        &self.feedback
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/cases", post(post_cases))
        .route("/feedback", post(post_feedback))
        .route("/feedback/summary", get(feedback_summary))
        .route("/health", get(health))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error_body(status: StatusCode, message: impl Into<String>, stage: Option<Stage>) -> Response {
    let mut body = json!({ "error": message.into() });
    if let Some(s) = stage {
        body["stage"] = json!(s.to_string());
    }
    (status, Json(body)).into_response()
}

fn stage_error_response(e: &StageError) -> Response {
    let status = if e.source.is_retryable() {
        StatusCode::SERVICE_UNAVAILABLE
    } else if e.stage == Stage::Preprocess && matches!(e.source, Error::Validation(_)) {
        StatusCode::BAD_REQUEST
    } else {
        StatusCode::INTERNAL_SERVER_ERROR
    };
    error_body(status, e.to_string(), Some(e.stage))
}

async fn post_cases(State(st): State<AppState>, body: Bytes) -> Response {
    let case: SupportCase = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => {
            return error_body(
                StatusCode::BAD_REQUEST,
                format!("invalid case body: {e}"),
                None,
            )
        }
    };
    if let Err(e) = case.validate() {
        return error_body(StatusCode::BAD_REQUEST, e.to_string(), None);
    }
    let pipeline = st.pipeline.clone();
    let rec = match tokio::task::spawn_blocking(move || pipeline.recommend(&case)).await {
        Ok(Ok(rec)) => rec,
        Ok(Err(e)) => {
            log::error!("{e}");
            return stage_error_response(&e);
        }
        Err(e) => {
            return error_body(
                StatusCode::INTERNAL_SERVER_ERROR,
                format!("pipeline task: {e}"),
                None,
            )
        }
    };
    log::info!(
        "case {} -> {:?}, {} results, score {:.4}",
        rec.case_id,
        rec.status,
        rec.results.len(),
        rec.single_turn_score
    );
    if rec.status != RecommendationStatus::NotSingleTurn {
        st.served
            .lock()
            .expect("cache lock")
            .put(rec.case_id.clone(), rec.clone());
    }
    if st.silent {
        return StatusCode::NO_CONTENT.into_response();
    }
    (StatusCode::OK, Json(rec)).into_response()
}

async fn post_feedback(State(st): State<AppState>, body: Bytes) -> Response {
    let mut record: FeedbackRecord = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error_body(
                StatusCode::BAD_REQUEST,
                format!("invalid feedback body: {e}"),
                None,
            )
        }
    };
    if let Err(e) = record.validate() {
        return error_body(StatusCode::BAD_REQUEST, e.to_string(), None);
    }
    let served = st
        .served
        .lock()
        .expect("cache lock")
        .get(&record.case_id)
        .map(|r| r.results.len());
    match served {
        None => {
            return error_body(
                StatusCode::NOT_FOUND,
                format!("no served recommendation for case {}", record.case_id),
                None,
            )
        }
        Some(n) if record.result_index >= n => {
            return error_body(
                StatusCode::BAD_REQUEST,
                format!(
                    "result_index {} out of range for {n} results",
                    record.result_index
                ),
                None,
            )
        }
        Some(_) => {}
    }
    if record.timestamp == 0 {
        record.timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(1);
    }
    let store = st.feedback.clone();
    let rec = record.clone();
    match tokio::task::spawn_blocking(move || store.append(rec)).await {
        Ok(Ok(outcome)) => {
            let status = match outcome {
                AppendOutcome::Stored => "stored",
                AppendOutcome::Duplicate => "duplicate",
            };
            (
                StatusCode::OK,
                Json(json!({ "status": status, "record": record })),
            )
                .into_response()
        }
        Ok(Err(e @ Error::Validation(_))) => {
            error_body(StatusCode::BAD_REQUEST, e.to_string(), None)
        }
        Ok(Err(e)) => error_body(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("persisting feedback: {e}"),
            None,
        ),
        Err(e) => error_body(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("feedback task: {e}"),
            None,
        ),
    }
}

async fn feedback_summary(State(st): State<AppState>) -> Response {
    (StatusCode::OK, Json(st.feedback.summary())).into_response()
}

async fn health(State(st): State<AppState>) -> Response {
    let p = &st.pipeline;
    Json(json!({
        "status": "ok",
        "documents": p.index.doc_count(),
        "collections": p.index.collections.len(),
        "embedder": p.models.base.id(),
        "reranker": p.models.reranker.id(),
        "generator": p.models.generator.id(),
        "silent_mode": st.silent,
    }))
    .into_response()
}
