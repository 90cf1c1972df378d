//! Agent ratings of served recommendations, kept in an append-only JSONL file.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackCategory {
    Useful,
    SomewhatUseful,
    NoUsefulSuggestion,
    NeedMoreClientInfo,
}

impl FeedbackCategory {
    pub const ALL: [FeedbackCategory; 4] = [
        FeedbackCategory::Useful,
        FeedbackCategory::SomewhatUseful,
        FeedbackCategory::NoUsefulSuggestion,
        FeedbackCategory::NeedMoreClientInfo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackCategory::Useful => "useful",
            FeedbackCategory::SomewhatUseful => "somewhat_useful",
            FeedbackCategory::NoUsefulSuggestion => "no_useful_suggestion",
            FeedbackCategory::NeedMoreClientInfo => "need_more_client_info",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRecord {
    pub case_id: String,
    pub result_index: usize,
    pub accuracy_stars: u8,
    pub readability_stars: u8,
    pub category: FeedbackCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    /// UTC seconds; 0 means "not supplied" and is filled in by the service.
    #[serde(default)]
    pub timestamp: u64,
}

impl FeedbackRecord {
    pub fn validate(&self) -> Result<()> {
        if self.case_id.trim().is_empty() {
            return Err(Error::Validation("case_id must not be empty".into()));
        }
        for (name, v) in [
            ("accuracy_stars", self.accuracy_stars),
            ("readability_stars", self.readability_stars),
        ] {
            if !(1..=5).contains(&v) {
                return Err(Error::Validation(format!(
                    "{name} must be between 1 and 5, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn key(&self) -> (String, usize, u64) {
        (self.case_id.clone(), self.result_index, self.timestamp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSummary {
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    pub proportions: BTreeMap<String, f64>,
    pub mean_accuracy_stars: Option<f64>,
    pub mean_readability_stars: Option<f64>,
}

pub fn summarize(records: &[FeedbackRecord]) -> FeedbackSummary {
    let mut counts: BTreeMap<String, usize> = FeedbackCategory::ALL
        .iter()
        .map(|c| (c.as_str().to_string(), 0))
        .collect();
    for r in records {
        *counts
            .get_mut(r.category.as_str())
            .expect("all categories present") += 1;
    }
    let total = records.len();
    let proportions = counts
        .iter()
        .map(|(k, &c)| {
            (
                k.clone(),
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                },
            )
        })
        .collect();
    let mean = |f: fn(&FeedbackRecord) -> u8| {
        (total > 0).then(|| records.iter().map(|r| f64::from(f(r))).sum::<f64>() / total as f64)
    };
    FeedbackSummary {
        total,
        counts,
        proportions,
        mean_accuracy_stars: mean(|r| r.accuracy_stars),
        mean_readability_stars: mean(|r| r.readability_stars),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Stored,
    /// Same (case_id, result_index, timestamp) already on disk.
    Duplicate,
}

struct StoreState {
    file: File,
    keys: HashSet<(String, usize, u64)>,
    records: Vec<FeedbackRecord>,
}

pub struct FeedbackStore {
    path: PathBuf,
    state: Mutex<StoreState>,
}

impl FeedbackStore {
    /// Opens or creates the file and replays existing records. A trailing
    /// line without a newline is an interrupted write and is dropped.
    pub fn open(path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        let mut keys = HashSet::new();
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let complete = match text.rfind('\n') {
                Some(i) => &text[..=i],
                None => "",
            };
            if complete.len() < text.len() {
                log::warn!("{}: ignoring incomplete trailing record", path.display());
            }
            for (i, line) in complete.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let r: FeedbackRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                keys.insert(r.key());
                records.push(r);
            }
            if complete.len() < text.len() {
                let f = OpenOptions::new().write(true).open(path)?;
                f.set_len(complete.len() as u64)?;
                f.sync_all()?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            state: Mutex::new(StoreState {
                file,
                keys,
                records,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Validates, appends and fsyncs before returning.
    pub fn append(&self, record: FeedbackRecord) -> Result<AppendOutcome> {
        record.validate()?;
        let mut st = self.state.lock().expect("feedback store lock");
        if st.keys.contains(&record.key()) {
            return Ok(AppendOutcome::Duplicate);
        }
        let mut line = serde_json::to_vec(&record)?;
        line.push(b'\n');
        st.file.write_all(&line)?;
        st.file.sync_data()?;
        st.keys.insert(record.key());
        st.records.push(record);
        Ok(AppendOutcome::Stored)
    }

    pub fn len(&self) -> usize {
        self.state
            .lock()
            .expect("feedback store lock")
            .records
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<FeedbackRecord> {
        self.state
            .lock()
            .expect("feedback store lock")
            .records
            .clone()
    }

    pub fn summary(&self) -> FeedbackSummary {
        summarize(&self.state.lock().expect("feedback store lock").records)
    }
}
