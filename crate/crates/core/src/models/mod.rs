//! Text embedding and generation behind object-safe traits.
//!
//! Concrete backends (HTTP, deterministic mocks) are looked up by name in a
//! [`ModelRegistry`] so the CLI and service can switch them at runtime.

mod http;
mod limit;
mod mock;
mod registry;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::{HttpEmbedder, HttpGenerator};
pub use limit::InFlightLimit;
pub use mock::{HashEmbedder, MockGenerator, TableEmbedder};
pub use registry::{EmbedderRole, ModelRegistry, ModelSet, ModelSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("embedding has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit Euclidean norm.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        self.0.iter_mut().for_each(|v| *v /= n);
        Ok(self)
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Configuration(format!(
            "cosine of vectors with dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine of zero-norm vector".into()));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: usize,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            temperature: 0.0,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < 1 {
            return Err(Error::Validation("max_tokens must be >= 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Validation("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

pub trait Embedder: Send + Sync {
    /// Stable identifier recorded alongside persisted embeddings.
    fn id(&self) -> &str;

    fn dim(&self) -> usize;

    /// Returns a unit-norm vector of length [`Embedder::dim`].
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

pub trait Generator: Send + Sync {
    fn id(&self) -> &str;

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String>;
}

/// Checks the contract shared by every embedder backend.
pub(crate) fn finish_embedding(
    values: Vec<f64>,
    expected_dim: usize,
    source: &str,
) -> Result<EmbeddingVector> {
    if values.len() != expected_dim {
        return Err(Error::Configuration(format!(
            "{source} returned a {}-dim vector, expected {expected_dim}",
            values.len()
        )));
    }
    EmbeddingVector::new(values)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn cosine_hand_values() {
        assert!((cosine(&v(&[0.6, 0.8]), &v(&[1.0, 0.0])).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((cosine(&v(&[3.0, 4.0]), &v(&[3.0, 4.0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            cosine(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(Error::Configuration(_))
        ));
        assert!(EmbeddingVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn generation_params_defaults_are_deterministic() {
        let p = GenerationParams::default();
        assert_eq!(p.temperature, 0.0);
        p.validate().unwrap();
        assert!(GenerationParams { max_tokens: 0, ..p }.validate().is_err());
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_self_one(a in prop::collection::vec(-10.0f64..10.0, 4), b in prop::collection::vec(-10.0f64..10.0, 4)) {
            let (a, b) = (v(&a), v(&b));
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let ab = cosine(&a, &b).unwrap();
            prop_assert!((ab - cosine(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
            let unit = a.clone().normalized().unwrap();
            prop_assert!((cosine(&unit, &unit).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
