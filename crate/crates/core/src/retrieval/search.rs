//! Per-collection dense search and cross-collection score fusion.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Collection, ScoredDoc};
use crate::models::{cosine, EmbeddingVector};

/// A nearest-neighbour backend over one collection.
pub trait VectorSearch: Send + Sync {
    fn name(&self) -> &str;

    /// Top `k` by cosine, score descending, ties by ascending `doc_id`.
    fn search(&self, query: &EmbeddingVector, collection: &Collection, k: usize) -> Vec<ScoredDoc>;
}

/// Brute-force scan. Exact, so results can be checked against an oracle.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactSearch;

impl VectorSearch for ExactSearch {
    fn name(&self) -> &str {
        "exact"
    }

    fn search(&self, query: &EmbeddingVector, collection: &Collection, k: usize) -> Vec<ScoredDoc> {
        search_collection(query, collection, k)
    }
}

pub(crate) fn by_score_then_id(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc.doc_id.cmp(&b.doc.doc_id))
}

pub fn search_collection(
    query: &EmbeddingVector,
    collection: &Collection,
    k: usize,
) -> Vec<ScoredDoc> {
    if k == 0 {
        return Vec::new();
    }
    let mut scored: Vec<ScoredDoc> = collection
        .documents
        .iter()
        .filter_map(|d| {
            // Dimensions are checked at ingestion; a mismatch here means the
            // query came from a different embedder.
            cosine(query, &d.embedding).ok().map(|score| ScoredDoc {
                doc: d.clone(),
                score,
            })
        })
        .collect();
    scored.sort_by(by_score_then_id);
    scored.truncate(k);
    scored
}

struct Head<'a> {
    item: &'a ScoredDoc,
    list: usize,
    pos: usize,
}

impl Head<'_> {
    // Greater means "comes first": higher score, then earlier list, then smaller doc_id.
    fn rank(&self, other: &Self) -> Ordering {
        self.item
            .score
            .total_cmp(&other.item.score)
            .then_with(|| other.list.cmp(&self.list))
            .then_with(|| other.item.doc.doc_id.cmp(&self.item.doc.doc_id))
    }
}

impl PartialEq for Head<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}
impl Eq for Head<'_> {}
impl PartialOrd for Head<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Head<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

/// k-way merge of per-collection lists into one global top `k`.
///
/// Each input must already be ordered by score descending then `doc_id`.
/// Ties across lists go to the earlier list.
pub fn fuse(per_collection: &[Vec<ScoredDoc>], k: usize) -> Vec<ScoredDoc> {
    let mut heap: BinaryHeap<Head<'_>> = per_collection
        .iter()
        .enumerate()
        .filter_map(|(list, xs)| xs.first().map(|item| Head { item, list, pos: 0 }))
        .collect();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let Some(head) = heap.pop() else { break };
        out.push(head.item.clone());
        let next = head.pos + 1;
        if let Some(item) = per_collection[head.list].get(next) {
            heap.push(Head {
                item,
                list: head.list,
                pos: next,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::tests::{collection, scored};

    fn ids(xs: &[ScoredDoc]) -> Vec<&str> {
        xs.iter().map(|s| s.doc.doc_id.as_str()).collect()
    }

    #[test]
    fn hand_built_2d_collection() {
        // q = (1, 0); a at 0°, b at 60°, c at 90°; cosines 1, 0.5, 0.
        let coll = collection(
            "c",
            vec![
                ("b", vec![0.5, 0.75f64.sqrt()]),
                ("c", vec![0.0, 1.0]),
                ("a", vec![1.0, 0.0]),
            ],
        );
        let q = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let top = search_collection(&q, &coll, 2);
        assert_eq!(ids(&top), ["a", "b"]);
        assert!((top[0].score - 1.0).abs() < 1e-12);
        assert!((top[1].score - 0.5).abs() < 1e-12);
        let all = search_collection(&q, &coll, 10);
        assert_eq!(ids(&all), ["a", "b", "c"]);
        assert!(search_collection(&q, &collection("e", vec![]), 3).is_empty());
    }

    #[test]
    fn ties_break_by_doc_id() {
        let coll = collection(
            "c",
            vec![
                ("z", vec![1.0, 1.0]),
                ("m", vec![1.0, 1.0]),
                ("a", vec![0.0, 1.0]),
            ],
        );
        let q = EmbeddingVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(ids(&ExactSearch.search(&q, &coll, 3)), ["m", "z", "a"]);
    }

    #[test]
    fn fuse_examples() {
        let a = vec![scored("a1", 0.9), scored("a2", 0.5)];
        let b = vec![scored("b1", 0.8), scored("b2", 0.7)];
        let f = fuse(&[a.clone(), b], 3);
        let scores: Vec<f64> = f.iter().map(|s| s.score).collect();
        assert_eq!(scores, [0.9, 0.8, 0.7]);
        assert_eq!(ids(&fuse(std::slice::from_ref(&a), 2)), ids(&a));
        assert!(fuse(&[], 3).is_empty());
        // Equal scores: earlier list first, even with a larger doc_id.
        let f = fuse(&[vec![scored("z", 0.5)], vec![scored("a", 0.5)]], 2);
        assert_eq!(ids(&f), ["z", "a"]);
    }
}
