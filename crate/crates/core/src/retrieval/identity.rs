//! When do two documentation links count as the same answer?
//!
//! A page may live at several URLs, carry a canonical link, or be republished
//! nearly verbatim for another product version. Any of those makes two
//! records identical for ranking and evaluation purposes.

use super::{DocumentRecord, ScoredDoc};
use crate::rouge::rouge1_f1;
use crate::text::normalize_token;

/// Lowercases scheme and host, drops the fragment and trailing slashes.
/// Strings that do not parse as absolute URLs get the same treatment textually.
pub fn normalize_url(raw: &str) -> String {
    let raw = raw.trim();
    match url::Url::parse(raw) {
        Ok(mut u) if u.has_host() => {
            u.set_fragment(None);
            let mut s = u.to_string();
            while s.ends_with('/') {
                s.pop();
            }
            s
        }
        _ => {
            let no_frag = raw.split('#').next().unwrap_or("");
            let (head, tail) = match no_frag.find("://") {
                Some(i) => {
                    let end = no_frag[i + 3..]
                        .find('/')
                        .map_or(no_frag.len(), |j| i + 3 + j);
                    no_frag.split_at(end)
                }
                None => ("", no_frag),
            };
            let mut s = head.to_lowercase() + tail;
            while s.ends_with('/') {
                s.pop();
            }
            s
        }
    }
}

fn content_tokens(doc: &DocumentRecord) -> Vec<String> {
    doc.content
        .iter()
        .filter_map(|t| normalize_token(t))
        .collect()
}

/// Content similarity used for the near-duplicate rule.
pub fn content_rouge1(a: &DocumentRecord, b: &DocumentRecord) -> f64 {
    rouge1_f1(&content_tokens(a), &content_tokens(b))
}

pub fn links_match(a: &DocumentRecord, b: &DocumentRecord, threshold: f64) -> bool {
    let (ua, ub) = (normalize_url(&a.url), normalize_url(&b.url));
    if ua == ub {
        return true;
    }
    let ca = a.canonical_url.as_deref().map(normalize_url);
    let cb = b.canonical_url.as_deref().map(normalize_url);
    match (&ca, &cb) {
        (Some(x), Some(y)) if x == y => return true,
        _ => {}
    }
    if ca.as_deref() == Some(ub.as_str()) || cb.as_deref() == Some(ua.as_str()) {
        return true;
    }
    content_rouge1(a, b) >= threshold
}

/// Greedy first-kept-wins: an item is dropped when it matches any item
/// already kept. Order is otherwise preserved.
pub fn dedup_results(results: Vec<ScoredDoc>, threshold: f64) -> Vec<ScoredDoc> {
    let mut kept: Vec<ScoredDoc> = Vec::with_capacity(results.len());
    for r in results {
        if !kept.iter().any(|k| links_match(&k.doc, &r.doc, threshold)) {
            kept.push(r);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::tests::doc;
    use std::sync::Arc;

    #[test]
    fn url_normalization() {
        assert_eq!(
            normalize_url("HTTPS://Docs.Example.COM/Page/#sec"),
            "https://docs.example.com/Page"
        );
        assert_eq!(
            normalize_url("https://docs.example.com/page"),
            "https://docs.example.com/page"
        );
        assert_eq!(normalize_url("not a url/"), "not a url");
        assert_eq!(normalize_url("https://a.b"), "https://a.b");
    }

    #[test]
    fn same_url_different_doc_id() {
        let a = doc("1", "https://d.io/x", None, "alpha beta");
        let b = doc("2", "https://D.io/x/", None, "gamma delta");
        assert!(links_match(&a, &b, 0.9));
    }

    #[test]
    fn canonical_rules() {
        let a = doc("1", "https://d.io/x?v=1", Some("https://d.io/x"), "alpha");
        let b = doc("2", "https://d.io/x?v=2", Some("https://d.io/x"), "omega");
        assert!(links_match(&a, &b, 0.9));
        let c = doc("3", "https://d.io/x", None, "zeta");
        assert!(links_match(&a, &c, 0.9));
        assert!(links_match(&c, &a, 0.9));
        let d = doc("4", "https://d.io/y", Some("https://d.io/z"), "eta");
        assert!(!links_match(&a, &d, 0.9));
    }

    #[test]
    fn near_identical_content_threshold() {
        // 20 shared tokens of 20 vs 21 tokens: F1 = 40/41 ≈ 0.976.
        let base: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let a = doc("1", "https://v1/x", None, &base.join(" "));
        let b = doc("2", "https://v2/x", None, &(base.join(" ") + " extra"));
        assert!(links_match(&a, &b, 0.9));
        // 16 of 20 shared: P = R = 0.8.
        let mut other = base[..16].to_vec();
        other.extend(["q1", "q2", "q3", "q4"].map(String::from));
        let c = doc("3", "https://v3/x", None, &other.join(" "));
        assert!((content_rouge1(&a, &c) - 0.8).abs() < 1e-12);
        assert!(!links_match(&a, &c, 0.9));
    }

    #[test]
    fn content_comparison_uses_metric_tokens() {
        let a = doc("1", "https://v1/x", None, "Restart the Server.");
        let b = doc("2", "https://v2/x", None, "restart THE server");
        assert!(links_match(&a, &b, 0.9));
    }

    #[test]
    fn dedup_keeps_first_of_each_group() {
        let mk = |id: &str, url: &str, text: &str, s: f64| ScoredDoc {
            doc: Arc::new(doc(id, url, None, text)),
            score: s,
        };
        let out = dedup_results(
            vec![
                mk("a", "https://d/1", "one two three", 0.9),
                mk("b", "https://d/1/", "four five six", 0.8),
                mk("c", "https://d/2", "seven eight nine", 0.7),
                mk("d", "https://d/3", "one two three", 0.6),
            ],
            0.9,
        );
        let ids: Vec<&str> = out.iter().map(|s| s.doc.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "c"]);
    }
}
