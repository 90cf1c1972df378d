//! Grounded answer generation for one retrieved document.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::models::{cosine, Embedder, EmbeddingVector, GenerationParams, Generator};
use crate::query::{render_template, Query};
use crate::retrieval::DocumentRecord;

pub const ANSWER_TEMPLATE: &str = include_str!("../assets/answer_prompt_v1.txt");
pub const ANSWER_TEMPLATE_VERSION: &str = "answer-gen/v1";
pub const ANSWER_TEMPLATE_HEADER: &str = "### solrec answer-gen v1";
/// Sentence the model is told to emit when the contexts are insufficient.
pub const REFUSAL_MARKER: &str = "An accurate answer cannot be provided.";

/// Token windows `[i·stride, min(i·stride + size, len))` with
/// `stride = size − overlap`, stopping at the first window that reaches `len`.
pub fn chunk_spans(len: usize, size: usize, overlap: usize) -> Result<Vec<Range<usize>>> {
    if size == 0 || overlap >= size {
        return Err(Error::Validation(format!(
            "chunk overlap {overlap} must be < size {size}"
        )));
    }
    if len == 0 {
        return Err(Error::Validation("cannot chunk an empty document".into()));
    }
    let stride = size - overlap;
    let mut spans = Vec::with_capacity(len.saturating_sub(size) / stride + 2);
    let mut start = 0;
    loop {
        let end = (start + size).min(len);
        spans.push(start..end);
        if end == len {
            return Ok(spans);
        }
        start += stride;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub start_token: usize,
    pub token_count: usize,
    pub text: String,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRef {
    pub doc_id: String,
    pub start_token: usize,
    pub token_count: usize,
}

impl From<&Chunk> for ChunkRef {
    fn from(c: &Chunk) -> Self {
        Self {
            doc_id: c.doc_id.clone(),
            start_token: c.start_token,
            token_count: c.token_count,
        }
    }
}

/// Splits and embeds a document's content; one embedding call per chunk.
pub fn chunk_document(
    doc: &DocumentRecord,
    size: usize,
    overlap: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<Chunk>> {
    chunk_spans(doc.content.len(), size, overlap)?
        .into_iter()
        .map(|r| {
            let text = doc.content[r.clone()].join(" ");
            Ok(Chunk {
                doc_id: doc.doc_id.clone(),
                start_token: r.start,
                token_count: r.len(),
                embedding: embedder.embed(&text)?,
                text,
            })
        })
        .collect()
}

/// Top `n` chunks by cosine to `query`, ties by ascending start token.
pub fn select_contexts(query: &EmbeddingVector, chunks: &[Chunk], n: usize) -> Result<Vec<Chunk>> {
    let mut scored = chunks
        .iter()
        .map(|c| Ok((cosine(query, &c.embedding)?, c)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.start_token.cmp(&b.1.start_token))
    });
    Ok(scored.into_iter().take(n).map(|(_, c)| c.clone()).collect())
}

pub fn build_answer_prompt(query_text: &str, contexts: &[Chunk]) -> Result<String> {
    if contexts.is_empty() {
        return Err(Error::Validation(
            "answer prompt needs at least one context".into(),
        ));
    }
    let numbered: Vec<String> = contexts
        .iter()
        .enumerate()
        .map(|(i, c)| format!("[Context {}] {}", i + 1, c.text))
        .collect();
    Ok(render_template(
        ANSWER_TEMPLATE,
        &[("query", query_text), ("contexts", &numbered.join("\n"))],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub query_text: String,
    pub url: String,
    pub answer_text: String,
    pub insufficient_context: bool,
    pub contexts_used: Vec<ChunkRef>,
}

pub fn generate_answer(
    query: &Query,
    doc: &DocumentRecord,
    embedder: &dyn Embedder,
    generator: &dyn Generator,
    config: &PipelineConfig,
    params: &GenerationParams,
) -> Result<Answer> {
    let chunks = chunk_document(
        doc,
        config.chunk_size_tokens,
        config.chunk_overlap_tokens,
        embedder,
    )?;
    let probe = embedder.embed(&query.text)?;
    let contexts = select_contexts(&probe, &chunks, config.n_contexts)?;
    let completion = generator.generate(&build_answer_prompt(&query.text, &contexts)?, params)?;
    let answer_text = completion.trim().to_string();
    if answer_text.is_empty() {
        return Err(Error::Generation("empty answer".into()));
    }
    Ok(Answer {
        query_text: query.text.clone(),
        url: doc.url.clone(),
        insufficient_context: answer_text.contains(REFUSAL_MARKER),
        answer_text,
        contexts_used: contexts.iter().map(ChunkRef::from).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HashEmbedder, MockGenerator};
    use crate::retrieval::{ingest_rows, CorpusRow};
    use proptest::prelude::*;

    #[test]
    fn five_thousand_tokens_make_three_chunks() {
        assert_eq!(
            chunk_spans(5000, 2500, 250).unwrap(),
            vec![0..2500, 2250..4750, 4500..5000]
        );
    }

    #[test]
    fn short_documents_make_one_chunk() {
        assert_eq!(chunk_spans(2000, 2500, 250).unwrap(), vec![0..2000]);
        assert_eq!(chunk_spans(2500, 2500, 250).unwrap(), vec![0..2500]);
        assert_eq!(chunk_spans(1, 2500, 250).unwrap(), vec![0..1]);
    }

    #[test]
    fn chunk_errors() {
        assert!(chunk_spans(0, 2500, 250).is_err());
        assert!(chunk_spans(10, 5, 5).is_err());
        assert_eq!(chunk_spans(10, 5, 0).unwrap(), vec![0..5, 5..10]);
    }

    fn chunk(start: usize, v: Vec<f64>) -> Chunk {
        Chunk {
            doc_id: "d".into(),
            start_token: start,
            token_count: 1,
            text: format!("t{start}"),
            embedding: EmbeddingVector::new(v).unwrap().normalized().unwrap(),
        }
    }

    #[test]
    fn select_contexts_by_hand_cosine() {
        // q = (1, 0). cosines: c0 = 0 (90°), c1 = 0.8, c2 = 1.0, c3 = 0.6
        let q = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let chunks = vec![
            chunk(0, vec![0.0, 1.0]),
            chunk(1, vec![0.8, 0.6]),
            chunk(2, vec![1.0, 0.0]),
            chunk(3, vec![0.6, 0.8]),
        ];
        let top: Vec<usize> = select_contexts(&q, &chunks, 3)
            .unwrap()
            .iter()
            .map(|c| c.start_token)
            .collect();
        assert_eq!(top, [2, 1, 3]);
        assert_eq!(select_contexts(&q, &chunks[..2], 3).unwrap().len(), 2);
        // Equal cosine: lower start first.
        let tied = vec![chunk(9, vec![1.0, 1.0]), chunk(4, vec![1.0, 1.0])];
        let order: Vec<usize> = select_contexts(&q, &tied, 2)
            .unwrap()
            .iter()
            .map(|c| c.start_token)
            .collect();
        assert_eq!(order, [4, 9]);
    }

    #[test]
    fn answer_prompt_numbers_contexts_and_carries_refusal() {
        let p = build_answer_prompt("How?", &[chunk(0, vec![1.0]), chunk(5, vec![1.0])]).unwrap();
        assert!(p.starts_with(ANSWER_TEMPLATE_HEADER));
        assert!(p.contains("Question: How?\n"));
        assert!(p.contains("[Context 1] t0\n[Context 2] t5\n"));
        assert!(p.contains(REFUSAL_MARKER));
        assert!(build_answer_prompt("How?", &[]).is_err());
    }

    fn one_doc(text: &str) -> DocumentRecord {
        let e = HashEmbedder::new("h", 32, "r");
        let index = ingest_rows(
            vec![CorpusRow::new("d1", "https://d/1", "Certs", text, "docs")],
            &e,
        )
        .unwrap();
        (*index.collections[0].documents[0]).clone()
    }

    #[test]
    fn generate_answer_with_mocks() {
        let e = HashEmbedder::new("h", 32, "r");
        let cfg = PipelineConfig {
            chunk_size_tokens: 8,
            chunk_overlap_tokens: 2,
            ..Default::default()
        };
        let doc = one_doc("intro text about nothing much here. to rotate broker certificates run the rotate command then restart");
        let q = Query::new("How do I rotate broker certificates?", "c").unwrap();
        let a = generate_answer(
            &q,
            &doc,
            &e,
            &MockGenerator::new(),
            &cfg,
            &GenerationParams::default(),
        )
        .unwrap();
        assert!(!a.insufficient_context);
        assert!(a.answer_text.starts_with("Based on context"));
        assert_eq!(a.url, "https://d/1");
        assert!(a.contexts_used.len() <= 3 && !a.contexts_used.is_empty());
        let again = generate_answer(
            &q,
            &doc,
            &e,
            &MockGenerator::new(),
            &cfg,
            &GenerationParams::default(),
        )
        .unwrap();
        assert_eq!(a, again);

        let off_topic = Query::new("Why is the sky blue?", "c").unwrap();
        let r = generate_answer(
            &off_topic,
            &doc,
            &e,
            &MockGenerator::new(),
            &cfg,
            &GenerationParams::default(),
        )
        .unwrap();
        assert!(r.insufficient_context);
        assert_eq!(r.answer_text, REFUSAL_MARKER);
    }

    proptest! {
        #[test]
        fn chunk_coverage_and_count(len in 1usize..10_000, size in 1usize..3000, overlap_frac in 0.0f64..1.0) {
            let overlap = ((size as f64) * overlap_frac) as usize % size;
            let spans = chunk_spans(len, size, overlap).unwrap();
            let stride = size - overlap;
            let expected = if len <= size { 1 } else { (len - size).div_ceil(stride) + 1 };
            prop_assert_eq!(spans.len(), expected);
            prop_assert_eq!(spans[0].start, 0);
            prop_assert_eq!(spans.last().unwrap().end, len);
            for w in spans.windows(2) {
                prop_assert_eq!(w[1].start, w[0].start + stride);
                prop_assert_eq!(w[0].end - w[1].start, overlap.min(w[0].len()));
            }
            prop_assert!(spans.iter().all(|r| r.len() <= size && !r.is_empty()));
        }
    }
}
