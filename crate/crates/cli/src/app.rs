use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use solrec_core::classifier::{ClassifierFile, LinearTurnScorer};
use solrec_core::models::{ModelRegistry, ModelSet, ModelSettings};
use solrec_core::preprocess::ProductAliasTable;
use solrec_core::retrieval::Index;
use solrec_core::{Pipeline, PipelineConfig};

/// Config file, or the built-in defaults.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))
        }
    }
}

/// Environment settings with an optional backend override.
pub fn model_settings(config: &PipelineConfig, backend: Option<&str>) -> ModelSettings {
    let mut s = ModelSettings::from_env(config.embedding_dim);
    if let Some(b) = backend {
        s.backend = b.to_string();
    }
    s
}

pub fn build_models(settings: &ModelSettings) -> Result<ModelSet> {
    let registry = ModelRegistry::with_builtins();
    registry.build(settings).with_context(|| {
        format!(
            "building '{}' models (available: {})",
            settings.backend,
            registry.backends().join(", ")
        )
    })
}

#[derive(Debug, Clone)]
pub struct PipelineSources {
    pub index: PathBuf,
    pub classifier: PathBuf,
    pub aliases: Option<PathBuf>,
}

pub fn build_pipeline(
    config: PipelineConfig,
    models: ModelSet,
    sources: &PipelineSources,
) -> Result<Pipeline> {
    let index = Index::load(&sources.index)
        .with_context(|| format!("loading index {}", sources.index.display()))?;
    let file = ClassifierFile::load(&sources.classifier)
        .with_context(|| format!("loading classifier {}", sources.classifier.display()))?;
    if (file.threshold - config.single_turn_threshold).abs() > f64::EPSILON {
        log::warn!(
            "classifier file threshold {} differs from configured {}; using the configured value",
            file.threshold,
            config.single_turn_threshold
        );
    }
    let scorer = LinearTurnScorer::new(file.model(), models.base.clone())?;
    let mut pipeline = Pipeline::new(config, models, Arc::new(scorer), Arc::new(index))?;
    if let Some(p) = &sources.aliases {
        pipeline = pipeline.with_aliases(
            ProductAliasTable::load(p)
                .with_context(|| format!("loading aliases {}", p.display()))?,
        );
    }
    Ok(pipeline)
}

/// Parses "1,3,5,10".
pub fn parse_n_values(text: &str) -> Result<Vec<usize>> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("bad n value '{s}'"))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() || values.contains(&0) {
        bail!("n values must be positive");
    }
    Ok(values)
}
