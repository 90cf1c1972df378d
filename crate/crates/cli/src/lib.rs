//! Wiring between the recommendation library, the command line and HTTP.

pub mod app;
pub mod service;

/// JSON Schema every served Recommendation validates against.
pub const RECOMMENDATION_SCHEMA: &str = include_str!("../schema/recommendation.schema.json");
