//! Corpus ingestion and the on-disk index.
//!
//! Corpus: JSONL `{doc_id, url, canonical_url?, title, text, collection}`.
//! Index: a header line `{format, embedder_id, dim}` followed by one record
//! per line with its embedding array.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normalize_url, Collection, DocumentRecord};
use crate::error::{Error, Result};
use crate::models::{Embedder, EmbeddingVector};
use crate::preprocess::clean_text;
use crate::text::whitespace_tokens;

pub const INDEX_FORMAT: &str = "solrec-index/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub doc_id: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_url: Option<String>,
    #[serde(default)]
    pub title: String,
    pub text: String,
    pub collection: String,
}

impl CorpusRow {
    pub fn new(doc_id: &str, url: &str, title: &str, text: &str, collection: &str) -> Self {
        Self {
            doc_id: doc_id.into(),
            url: url.into(),
            canonical_url: None,
            title: title.into(),
            text: text.into(),
            collection: collection.into(),
        }
    }

    pub fn with_canonical(mut self, canonical: &str) -> Self {
        self.canonical_url = Some(canonical.into());
        self
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.doc_id.trim().is_empty() {
            return Err("doc_id must be nonempty".into());
        }
        if self.url.trim().is_empty() {
            return Err("url must be nonempty".into());
        }
        if self.collection.trim().is_empty() {
            return Err("collection must be nonempty".into());
        }
        if clean_text(&self.title).is_empty() && clean_text(&self.text).is_empty() {
            return Err("title and text are both empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub embedder_id: String,
    pub dim: usize,
    /// In order of first appearance in the corpus; this order breaks fusion ties.
    pub collections: Vec<Collection>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    embedder_id: String,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct StoredRecord {
    doc_id: String,
    url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canonical_url: Option<String>,
    title: String,
    text: String,
    collection: String,
    embedding: Vec<f64>,
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<(usize, CorpusRow)>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: CorpusRow =
            serde_json::from_str(&line).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        row.check().map_err(|m| parse_error(path, i + 1, m))?;
        rows.push((i + 1, row));
    }
    Ok(rows)
}

pub fn ingest_corpus(path: &Path, embedder: &dyn Embedder) -> Result<Index> {
    let rows = read_corpus(path)?;
    build(rows, embedder, |line, msg| parse_error(path, line, msg))
}

/// In-memory variant of [`ingest_corpus`]; "line" numbers are 1-based positions.
pub fn ingest_rows(rows: Vec<CorpusRow>, embedder: &dyn Embedder) -> Result<Index> {
    for (i, r) in rows.iter().enumerate() {
        r.check()
            .map_err(|m| Error::Validation(format!("row {}: {m}", i + 1)))?;
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| (i + 1, r))
        .collect();
    build(rows, embedder, |line, msg| {
        Error::Validation(format!("row {line}: {msg}"))
    })
}

fn build(
    rows: Vec<(usize, CorpusRow)>,
    embedder: &dyn Embedder,
    err: impl Fn(usize, String) -> Error,
) -> Result<Index> {
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (line, r) in &rows {
        if !seen.insert((r.collection.clone(), r.doc_id.clone())) {
            return Err(err(
                *line,
                format!(
                    "duplicate doc_id {:?} in collection {:?}",
                    r.doc_id, r.collection
                ),
            ));
        }
    }
    let records: Vec<DocumentRecord> = rows
        .into_par_iter()
        .map(|(_, r)| {
            let mut d = DocumentRecord {
                doc_id: r.doc_id,
                url: r.url.trim().to_string(),
                canonical_url: r
                    .canonical_url
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty()),
                title: clean_text(&r.title),
                content: whitespace_tokens(&clean_text(&r.text)),
                collection_id: r.collection,
                embedding: EmbeddingVector::new(vec![])?,
            };
            d.embedding = embedder.embed(&d.embedding_text())?;
            if d.embedding.dim() != embedder.dim() {
                return Err(Error::Configuration(format!(
                    "embedder {} returned {} dims, declared {}",
                    embedder.id(),
                    d.embedding.dim(),
                    embedder.dim()
                )));
            }
            Ok(d)
        })
        .collect::<Result<_>>()?;
    Ok(Index::from_records(
        embedder.id().to_string(),
        embedder.dim(),
        records,
    ))
}

impl Index {
    fn from_records(embedder_id: String, dim: usize, records: Vec<DocumentRecord>) -> Self {
        let mut collections: Vec<Collection> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        for r in records {
            let i = *pos.entry(r.collection_id.clone()).or_insert_with(|| {
                collections.push(Collection {
                    collection_id: r.collection_id.clone(),
                    documents: Vec::new(),
                });
                collections.len() - 1
            });
            collections[i].documents.push(Arc::new(r));
        }
        Self {
            embedder_id,
            dim,
            collections,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.collections.iter().map(|c| c.documents.len()).sum()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Arc<DocumentRecord>> {
        self.collections.iter().flat_map(|c| c.documents.iter())
    }

    /// First document whose url or canonical url normalizes to `url`.
    pub fn find_by_url(&self, url: &str) -> Option<Arc<DocumentRecord>> {
        let want = normalize_url(url);
        self.documents()
            .find(|d| normalize_url(&d.url) == want)
            .or_else(|| {
                self.documents().find(|d| {
                    d.canonical_url.as_deref().map(normalize_url).as_deref() == Some(want.as_str())
                })
            })
            .cloned()
    }

    /// Errors when query vectors from `embedder` could not be compared to this index.
    pub fn check_compatible(&self, embedder: &dyn Embedder) -> Result<()> {
        if embedder.dim() != self.dim {
            return Err(Error::Configuration(format!(
                "index has {}-dim embeddings, embedder {} produces {}",
                self.dim,
                embedder.id(),
                embedder.dim()
            )));
        }
        if embedder.id() != self.embedder_id {
            log::warn!(
                "index built with {:?}, querying with {:?}",
                self.embedder_id,
                embedder.id()
            );
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        let header = Header {
            format: INDEX_FORMAT.into(),
            embedder_id: self.embedder_id.clone(),
            dim: self.dim,
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for d in self.documents() {
            let rec = StoredRecord {
                doc_id: d.doc_id.clone(),
                url: d.url.clone(),
                canonical_url: d.canonical_url.clone(),
                title: d.title.clone(),
                text: d.content.join(" "),
                collection: d.collection_id.clone(),
                embedding: d.embedding.values().to_vec(),
            };
            writeln!(w, "{}", serde_json::to_string(&rec)?)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => serde_json::from_str(&line?)
                .map_err(|e| parse_error(path, 1, format!("bad header: {e}")))?,
            None => return Err(parse_error(path, 1, "empty index file")),
        };
        if header.format != INDEX_FORMAT {
            return Err(parse_error(
                path,
                1,
                format!("unsupported index format {:?}", header.format),
            ));
        }
        let mut records = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StoredRecord =
                serde_json::from_str(&line).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
            if rec.embedding.len() != header.dim {
                return Err(Error::Configuration(format!(
                    "{}:{}: embedding has {} dims, header says {}",
                    path.display(),
                    i + 1,
                    rec.embedding.len(),
                    header.dim
                )));
            }
            if !seen.insert((rec.collection.clone(), rec.doc_id.clone())) {
                return Err(parse_error(
                    path,
                    i + 1,
                    format!("duplicate doc_id {:?}", rec.doc_id),
                ));
            }
            records.push(DocumentRecord {
                doc_id: rec.doc_id,
                url: rec.url,
                canonical_url: rec.canonical_url,
                title: rec.title,
                content: whitespace_tokens(&rec.text),
                collection_id: rec.collection,
                embedding: EmbeddingVector::new(rec.embedding)
                    .map_err(|e| parse_error(path, i + 1, e.to_string()))?,
            });
        }
        Ok(Self::from_records(header.embedder_id, header.dim, records))
    }
}
