//! Dense retrieval over several document collections.
//!
//! Flow for one case: embed the question (plus product aliases) with the base
//! embedder, take the top `per_collection_k` from every collection, merge to
//! the global top `final_k`, rescore with the re-ranking embedder against the
//! case+question text, then drop results that are the same link.

mod identity;
mod index;
mod rerank;
mod search;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::models::{EmbeddingVector, ModelSet};
use crate::preprocess::ProductAliasTable;
use crate::query::Query;
use crate::types::SupportCase;

pub use identity::{content_rouge1, dedup_results, links_match, normalize_url};
pub use index::{ingest_corpus, ingest_rows, CorpusRow, Index};
pub use rerank::{build_rerank_text, rerank};
pub use search::{fuse, search_collection, ExactSearch, VectorSearch};

/// Number of content tokens, after the title, that go into a document embedding.
pub const DOC_EMBED_PREFIX_TOKENS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub url: String,
    pub canonical_url: Option<String>,
    pub title: String,
    /// Whitespace tokens of the cleaned text.
    pub content: Vec<String>,
    pub collection_id: String,
    pub embedding: EmbeddingVector,
}

impl DocumentRecord {
    /// Title plus the first [`DOC_EMBED_PREFIX_TOKENS`] content tokens.
    pub fn embedding_text(&self) -> String {
        let body = self.content[..self.content.len().min(DOC_EMBED_PREFIX_TOKENS)].join(" ");
        match (self.title.is_empty(), body.is_empty()) {
            (false, false) => format!("{}\n{body}", self.title),
            (false, true) => self.title.clone(),
            _ => body,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub collection_id: String,
    pub documents: Vec<Arc<DocumentRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc: Arc<DocumentRecord>,
    pub score: f64,
}

impl ScoredDoc {
    pub fn origin_collection(&self) -> &str {
        &self.doc.collection_id
    }
}

#[derive(Debug, Clone, Default)]
pub struct RetrievalOutcome {
    /// Final ranking after re-ranking and dedup, at most `final_k`.
    pub docs: Vec<ScoredDoc>,
    /// Fused first-pass ranking before re-ranking.
    pub first_pass: Vec<ScoredDoc>,
    pub warning: Option<String>,
}

/// Question text with the product name and its aliases appended.
pub fn search_text(case: &SupportCase, query: &Query, aliases: &ProductAliasTable) -> String {
    let product = case.product_name.trim();
    if product.is_empty() {
        return query.text.clone();
    }
    let mut parts = vec![query.text.clone()];
    parts.extend(aliases.expand(product));
    parts.join(" ")
}

pub fn retrieve(
    case: &SupportCase,
    query: &Query,
    index: &Index,
    models: &ModelSet,
    aliases: &ProductAliasTable,
    search: &dyn VectorSearch,
    config: &PipelineConfig,
) -> Result<RetrievalOutcome> {
    if index.collections.iter().all(|c| c.documents.is_empty()) {
        return Ok(RetrievalOutcome {
            warning: Some("all collections are empty".into()),
            ..Default::default()
        });
    }
    let probe = models.base.embed(&search_text(case, query, aliases))?;
    let per_collection: Vec<Vec<ScoredDoc>> = index
        .collections
        .par_iter()
        .map(|c| search.search(&probe, c, config.per_collection_k))
        .collect();
    let first_pass = fuse(&per_collection, config.final_k);
    let reranked = rerank(
        &case.cleaned_text,
        query,
        first_pass.clone(),
        models.reranker.as_ref(),
    )?;
    let mut docs = dedup_results(reranked, config.link_identity_rouge1_threshold);
    docs.truncate(config.final_k);
    Ok(RetrievalOutcome {
        docs,
        first_pass,
        warning: None,
    })
}
