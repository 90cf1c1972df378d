//! Name → factory registry for model backends.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    Embedder, Generator, HashEmbedder, HttpEmbedder, HttpGenerator, InFlightLimit, MockGenerator,
};
use crate::config::DEFAULT_EMBEDDING_DIM;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedderRole {
    /// First-pass retrieval embedding, shared with the document index.
    Base,
    /// Task-specific embedding used for re-ranking and context selection.
    Reranker,
}

/// Connection settings handed to every factory.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub backend: String,
    pub generator_url: Option<String>,
    pub embedder_base_url: Option<String>,
    pub embedder_rerank_url: Option<String>,
    pub api_key: Option<String>,
    pub embedding_dim: usize,
    pub max_in_flight: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            backend: "mock".into(),
            generator_url: None,
            embedder_base_url: None,
            embedder_rerank_url: None,
            api_key: None,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            max_in_flight: InFlightLimit::DEFAULT,
        }
    }
}

impl ModelSettings {
    /// Reads `GENERATOR_URL`, `EMBEDDER_BASE_URL`, `EMBEDDER_RERANK_URL`,
    /// `MODEL_API_KEY`, `MODEL_MAX_IN_FLIGHT` and `MOCK_MODELS`.
    pub fn from_env(embedding_dim: usize) -> Self {
        Self::from_lookup(embedding_dim, |k| std::env::var(k).ok())
    }

    pub fn from_lookup(embedding_dim: usize, get: impl Fn(&str) -> Option<String>) -> Self {
        let nonempty = |k: &str| get(k).filter(|v| !v.trim().is_empty());
        let mock = matches!(
            get("MOCK_MODELS").as_deref().map(str::trim),
            Some("1" | "true" | "yes")
        );
        Self {
            backend: if mock { "mock" } else { "http" }.into(),
            generator_url: nonempty("GENERATOR_URL"),
            embedder_base_url: nonempty("EMBEDDER_BASE_URL"),
            embedder_rerank_url: nonempty("EMBEDDER_RERANK_URL"),
            api_key: nonempty("MODEL_API_KEY"),
            embedding_dim,
            max_in_flight: nonempty("MODEL_MAX_IN_FLIGHT")
                .and_then(|v| v.parse().ok())
                .unwrap_or(InFlightLimit::DEFAULT),
        }
    }
}

pub type EmbedderFactory =
    Box<dyn Fn(EmbedderRole, &ModelSettings) -> Result<Arc<dyn Embedder>> + Send + Sync>;
pub type GeneratorFactory = Box<dyn Fn(&ModelSettings) -> Result<Arc<dyn Generator>> + Send + Sync>;

/// The three model handles a pipeline needs.
#[derive(Clone)]
pub struct ModelSet {
    pub base: Arc<dyn Embedder>,
    pub reranker: Arc<dyn Embedder>,
    pub generator: Arc<dyn Generator>,
}

impl ModelSet {
    /// Distinct deterministic mocks for each role.
    pub fn mock(dim: usize) -> Self {
        ModelRegistry::with_builtins()
            .build(&ModelSettings {
                embedding_dim: dim,
                ..Default::default()
            })
            .expect("mock backends always build")
    }
}

pub struct ModelRegistry {
    embedders: BTreeMap<String, EmbedderFactory>,
    generators: BTreeMap<String, GeneratorFactory>,
}

fn required(url: &Option<String>, var: &str) -> Result<String> {
    url.clone()
        .ok_or_else(|| Error::Configuration(format!("{var} is not set (or set MOCK_MODELS=1)")))
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            embedders: BTreeMap::new(),
            generators: BTreeMap::new(),
        }
    }

    /// Registers `mock` and `http` backends.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register_embedder("mock", |role, s| {
            let (id, salt) = match role {
                EmbedderRole::Base => ("hash-mock-base", "base"),
                EmbedderRole::Reranker => ("hash-mock-rerank", "rerank"),
            };
            Ok(Arc::new(HashEmbedder::new(id, s.embedding_dim, salt)))
        });
        r.register_generator("mock", |_| Ok(Arc::new(MockGenerator::new())));
        r.register_embedder("http", |role, s| {
            let (id, url) = match role {
                EmbedderRole::Base => (
                    "http-base",
                    required(&s.embedder_base_url, "EMBEDDER_BASE_URL")?,
                ),
                EmbedderRole::Reranker => (
                    "http-rerank",
                    required(&s.embedder_rerank_url, "EMBEDDER_RERANK_URL")?,
                ),
            };
            Ok(Arc::new(HttpEmbedder::new(
                id,
                url,
                s.api_key.clone(),
                s.embedding_dim,
                s.max_in_flight,
            )))
        });
        r.register_generator("http", |s| {
            let url = required(&s.generator_url, "GENERATOR_URL")?;
            Ok(Arc::new(HttpGenerator::new(
                "http-generator",
                url,
                s.api_key.clone(),
                s.max_in_flight,
            )))
        });
        r
    }

    pub fn register_embedder(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(EmbedderRole, &ModelSettings) -> Result<Arc<dyn Embedder>>
            + Send
            + Sync
            + 'static,
    ) {
        self.embedders.insert(name.into(), Box::new(factory));
    }

    pub fn register_generator(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(&ModelSettings) -> Result<Arc<dyn Generator>> + Send + Sync + 'static,
    ) {
        self.generators.insert(name.into(), Box::new(factory));
    }

    pub fn backends(&self) -> Vec<&str> {
        self.embedders
            .keys()
            .filter(|k| self.generators.contains_key(*k))
            .map(String::as_str)
            .collect()
    }

    pub fn embedder(
        &self,
        name: &str,
        role: EmbedderRole,
        settings: &ModelSettings,
    ) -> Result<Arc<dyn Embedder>> {
        let f = self
            .embedders
            .get(name)
            .ok_or_else(|| Error::Configuration(format!("unknown embedder backend {name:?}")))?;
        let e = f(role, settings)?;
        if e.dim() != settings.embedding_dim {
            return Err(Error::Configuration(format!(
                "embedder {} has dimension {}, config says {}",
                e.id(),
                e.dim(),
                settings.embedding_dim
            )));
        }
        Ok(e)
    }

    pub fn generator(&self, name: &str, settings: &ModelSettings) -> Result<Arc<dyn Generator>> {
        let f = self
            .generators
            .get(name)
            .ok_or_else(|| Error::Configuration(format!("unknown generator backend {name:?}")))?;
        f(settings)
    }

    /// Builds base, re-ranker and generator from `settings.backend`.
    pub fn build(&self, settings: &ModelSettings) -> Result<ModelSet> {
        Ok(ModelSet {
            base: self.embedder(&settings.backend, EmbedderRole::Base, settings)?,
            reranker: self.embedder(&settings.backend, EmbedderRole::Reranker, settings)?,
            generator: self.generator(&settings.backend, settings)?,
        })
    }
}
