//! Tokenization shared by chunking, metrics, and the mock models.

/// Whitespace tokenization, no normalization. This is the unit for chunk sizes.
pub fn whitespace_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Metric tokenization: lowercase, whitespace split, punctuation stripped.
/// Tokens that are pure punctuation disappear.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(normalize_token)
        .collect()
}

pub fn normalize_token(token: &str) -> Option<String> {
    let t: String = token
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .flat_map(char::to_lowercase)
        .collect();
    (!t.is_empty()).then_some(t)
}

/// Label written into reports so scores stay comparable across runs.
pub const METRIC_TOKENIZATION: &str = "lowercase+whitespace+strip_ascii_punctuation";

/// 64-bit FNV-1a. Stable across processes and platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
