#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use solrec::app::{build_models, build_pipeline, model_settings, PipelineSources};
use solrec::service::{AppState, DEFAULT_CACHE_ENTRIES};
use solrec_core::feedback::FeedbackStore;
use solrec_core::{Pipeline, PipelineConfig};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn solrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solrec"))
        .args(args)
        .env("MOCK_MODELS", "1")
        .env_remove("INDEX_PATH")
        .env_remove("CLASSIFIER_PATH")
        .env_remove("SILENT_MODE")
        .output()
        .expect("spawn solrec")
}

pub fn check(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Index and classifier built from the fixtures with mock models.
pub struct Prepared {
    pub dir: tempfile::TempDir,
    pub index: PathBuf,
    pub classifier: PathBuf,
}

impl Prepared {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let index = dir.path().join("index.jsonl");
        let classifier = dir.path().join("classifier.json");
        check(&solrec(&[
            "ingest",
            "--corpus",
            fixture("corpus.jsonl").to_str().unwrap(),
            "--out",
            index.to_str().unwrap(),
        ]));
        check(&solrec(&[
            "train-classifier",
            "--data",
            fixture("classifier_train.jsonl").to_str().unwrap(),
            "--out",
            classifier.to_str().unwrap(),
        ]));
        Self {
            dir,
            index,
            classifier,
        }
    }

    pub fn sources(&self) -> PipelineSources {
        PipelineSources {
            index: self.index.clone(),
            classifier: self.classifier.clone(),
            aliases: Some(fixture("aliases.json")),
        }
    }

    pub fn pipeline_args(&self) -> Vec<String> {
        vec![
            "--index".into(),
            self.index.display().to_string(),
            "--classifier".into(),
            self.classifier.display().to_string(),
            "--aliases".into(),
            fixture("aliases.json").display().to_string(),
        ]
    }

    pub fn pipeline(&self) -> Pipeline {
        let config = PipelineConfig::default();
        let models = build_models(&model_settings(&config, Some("mock"))).unwrap();
        build_pipeline(config, models, &self.sources()).unwrap()
    }

    pub fn state(&self, silent: bool) -> AppState {
        let store =
            FeedbackStore::open(&self.dir.path().join(format!("feedback-{silent}.jsonl"))).unwrap();
        AppState::new(self.pipeline(), store, DEFAULT_CACHE_ENTRIES, silent)
    }
}
