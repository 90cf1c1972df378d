//! Solution recommendation for IT support cases.
//!
//! A case is cleaned, scored by a turn classifier, distilled into a search
//! question, matched against several document collections, re-ranked, and
//! answered from passages of each surviving document. [`eval`] measures the
//! same pipeline offline; [`feedback`] stores agent ratings.

pub mod answer;
pub mod classifier;
pub mod config;
pub mod error;
pub mod eval;
pub mod feedback;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod query;
pub mod retrieval;
pub mod rouge;
pub mod text;
pub mod types;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::{Pipeline, Stage, StageError};
pub use types::{
    Recommendation, RecommendationResult, RecommendationStatus, ResultStatus, SupportCase,
    TurnLabel,
};
