use super::ScoredDoc;
use crate::error::Result;
use crate::models::{cosine, Embedder};
use crate::query::Query;

/// Question first, then the original case.
pub fn build_rerank_text(case_text: &str, query_text: &str) -> String {
    format!("{query_text}\n{case_text}")
}

/// Rescores candidates with the re-ranking embedder against freshly embedded
/// documents. Stable, so equal scores keep their first-pass order.
pub fn rerank(
    case_text: &str,
    query: &Query,
    candidates: Vec<ScoredDoc>,
    reranker: &dyn Embedder,
) -> Result<Vec<ScoredDoc>> {
    if candidates.len() <= 1 {
        return Ok(candidates);
    }
    let probe = reranker.embed(&build_rerank_text(case_text, &query.text))?;
    let mut rescored = candidates
        .into_iter()
        .map(|c| {
            let v = reranker.embed(&c.doc.embedding_text())?;
            Ok(ScoredDoc {
                score: cosine(&probe, &v)?,
                doc: c.doc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rescored.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(rescored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HashEmbedder, TableEmbedder};
    use crate::retrieval::tests::doc;
    use std::sync::Arc;

    fn query(text: &str) -> Query {
        Query::new(text, "c").unwrap()
    }

    #[test]
    fn rerank_text_order() {
        assert_eq!(
            build_rerank_text("case body", "question?"),
            "question?\ncase body"
        );
    }

    #[test]
    fn single_candidate_unchanged() {
        let e = HashEmbedder::new("r", 8, "r");
        let c = vec![ScoredDoc {
            doc: Arc::new(doc("a", "https://x/a", None, "text")),
            score: 0.3,
        }];
        let out = rerank("case", &query("q?"), c.clone(), &e).unwrap();
        assert_eq!(out[0].score, 0.3);
        assert_eq!(out[0].doc.doc_id, "a");
    }

    #[test]
    fn pinned_geometry_swaps_order() {
        let d1 = doc("d1", "https://x/1", None, "first doc");
        let d2 = doc("d2", "https://x/2", None, "second doc");
        let probe = build_rerank_text("case", "q?");
        // probe (1,0); d1 at cos 0.6, d2 at cos 0.8.
        let e = TableEmbedder::new("t", Box::new(HashEmbedder::new("h", 2, "h")))
            .with(probe.clone(), vec![1.0, 0.0])
            .unwrap()
            .with(d1.embedding_text(), vec![0.6, 0.8])
            .unwrap()
            .with(d2.embedding_text(), vec![0.8, 0.6])
            .unwrap();
        let cands = vec![
            ScoredDoc {
                doc: Arc::new(d1),
                score: 0.9,
            },
            ScoredDoc {
                doc: Arc::new(d2),
                score: 0.5,
            },
        ];
        let out = rerank("case", &query("q?"), cands, &e).unwrap();
        assert_eq!(out[0].doc.doc_id, "d2");
        assert!((out[0].score - 0.8).abs() < 1e-12);
        assert!((out[1].score - 0.6).abs() < 1e-12);
    }
}
