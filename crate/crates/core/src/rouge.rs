//! ROUGE-1 and ROUGE-L F1 over pre-tokenized sequences.

use std::collections::HashMap;

use crate::classifier::f1_score;

fn f1_from_overlap(overlap: usize, candidate_len: usize, reference_len: usize) -> f64 {
    if overlap == 0 || candidate_len == 0 || reference_len == 0 {
        return 0.0;
    }
    f1_score(
        overlap as f64 / candidate_len as f64,
        overlap as f64 / reference_len as f64,
    )
}

/// Unigram F1 with clipped counts.
pub fn rouge1_f1<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    let mut counts: HashMap<&str, usize> = HashMap::with_capacity(reference.len());
    for t in reference {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0;
    for t in candidate {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    f1_from_overlap(overlap, candidate.len(), reference.len())
}

/// Longest common subsequence length, O(n·m) time and O(min) memory.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// LCS-based F1: P = LCS/|cand|, R = LCS/|ref|.
pub fn rouge_l_f1<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    f1_from_overlap(
        lcs_len(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn rouge1_hand_cases() {
        assert_eq!(rouge1_f1(&toks("a b c"), &toks("a b c")), 1.0);
        assert_eq!(rouge1_f1(&toks("a b c"), &toks("x y z")), 0.0);
        assert_eq!(rouge1_f1(&toks("a b c"), &toks("a b d")), 2.0 / 3.0);
        assert_eq!(rouge1_f1::<&str>(&[], &toks("a")), 0.0);
        // Clipping: candidate repeats "a" but reference has it once.
        // overlap 1, P = 1/3, R = 1/2, F1 = 0.4
        assert!((rouge1_f1(&toks("a a a"), &toks("a b")) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rouge_l_hand_cases() {
        assert_eq!(rouge_l_f1(&toks("a b c d"), &toks("a b c d")), 1.0);
        assert_eq!(lcs_len(&toks("a b c d"), &toks("a c b d")), 3);
        assert_eq!(rouge_l_f1(&toks("a b c d"), &toks("a c b d")), 0.75);
        assert_eq!(rouge_l_f1(&[] as &[&str], &toks("a b")), 0.0);
    }

    proptest! {
        #[test]
        fn rouge1_symmetric(a in prop::collection::vec("[a-d]", 0..15), b in prop::collection::vec("[a-d]", 0..15)) {
            prop_assert!((rouge1_f1(&a, &b) - rouge1_f1(&b, &a)).abs() < 1e-12);
            prop_assert!((rouge_l_f1(&a, &b) - rouge_l_f1(&b, &a)).abs() < 1e-12);
        }

        #[test]
        fn rouge_l_never_exceeds_rouge1(a in prop::collection::vec("[a-d]", 1..15), b in prop::collection::vec("[a-d]", 1..15)) {
            prop_assert!(rouge_l_f1(&a, &b) <= rouge1_f1(&a, &b) + 1e-12);
        }
    }
}
