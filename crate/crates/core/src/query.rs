//! Distilling a case into one retrieval question.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{GenerationParams, Generator};
use crate::types::SupportCase;

pub const QUERY_TEMPLATE: &str = include_str!("../assets/query_prompt_v1.txt");
pub const QUERY_TEMPLATE_VERSION: &str = "query-gen/v1";
/// First line of [`QUERY_TEMPLATE`]; lets mocks and logs recognize the prompt.
pub const QUERY_TEMPLATE_HEADER: &str = "### solrec query-gen v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub source_case_id: String,
    pub template_version: String,
}

impl Query {
    /// Whitespace (including newlines) is collapsed to single spaces.
    pub fn new(text: &str, source_case_id: impl Into<String>) -> Result<Self> {
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if text.is_empty() {
            return Err(Error::Generation("empty query".into()));
        }
        Ok(Self {
            text,
            source_case_id: source_case_id.into(),
            template_version: QUERY_TEMPLATE_VERSION.into(),
        })
    }
}

/// Replaces `{name}` placeholders in one left-to-right pass, so substituted
/// values are never re-scanned.
pub(crate) fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out =
        String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        for (name, value) in vars {
            let tail = &rest[open + 1..];
            if tail.starts_with(name) && tail[name.len()..].starts_with('}') {
                out.push_str(&rest[..open]);
                out.push_str(value);
                rest = &tail[name.len() + 1..];
                continue 'outer;
            }
        }
        out.push_str(&rest[..=open]);
        rest = &rest[open + 1..];
    }
    out.push_str(rest);
    out
}

pub fn build_query_prompt(case_text: &str) -> Result<String> {
    if case_text.trim().is_empty() {
        return Err(Error::Validation("case text must be nonempty".into()));
    }
    Ok(render_template(QUERY_TEMPLATE, &[("case_text", case_text)]))
}

/// Keeps the first question of a completion.
///
/// Up to and including the first `?` if there is one; else through the first
/// `.` or `!` that is followed by whitespace or the end; else everything.
/// The result is always a prefix of the trimmed input.
pub fn first_question(raw: &str) -> Result<String> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(Error::Generation("empty completion".into()));
    }
    if let Some(i) = text.find('?') {
        return Ok(text[..=i].to_string());
    }
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '.' || c == '!' {
            match chars.peek() {
                None => return Ok(text.to_string()),
                Some((_, next)) if next.is_whitespace() => return Ok(text[..=i].to_string()),
                _ => {}
            }
        }
    }
    Ok(text.to_string())
}

/// Prompts the generator with the case's cleaned text and keeps the first question.
pub fn generate_query(
    case: &SupportCase,
    generator: &dyn Generator,
    params: &GenerationParams,
) -> Result<Query> {
    if case.cleaned_text.trim().is_empty() {
        return Err(Error::Validation(format!(
            "case {} has not been preprocessed",
            case.case_id
        )));
    }
    let prompt = build_query_prompt(&case.cleaned_text)?;
    let raw = generator.generate(&prompt, params)?;
    Query::new(&first_question(&raw)?, case.case_id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MockGenerator;
    use crate::preprocess::preprocess_case;
    use proptest::prelude::*;

    #[test]
    fn first_question_examples() {
        assert_eq!(
            first_question("How do I reset TLS? You should also…").unwrap(),
            "How do I reset TLS?"
        );
        assert_eq!(
            first_question("Restart the broker.").unwrap(),
            "Restart the broker."
        );
        assert_eq!(
            first_question("why does install fail").unwrap(),
            "why does install fail"
        );
        assert_eq!(
            first_question("  Use v1.2 now! Then more.").unwrap(),
            "Use v1.2 now!"
        );
        assert_eq!(
            first_question("Hi. How do I reset?").unwrap(),
            "Hi. How do I reset?"
        );
        assert!(matches!(first_question("  \n "), Err(Error::Generation(_))));
    }

    #[test]
    fn prompt_is_deterministic_and_contains_case() {
        let p = build_query_prompt("Login fails\nafter {upgrade}").unwrap();
        assert!(p.starts_with(QUERY_TEMPLATE_HEADER));
        assert!(p.ends_with("Case:\nLogin fails\nafter {upgrade}\n"));
        assert!(!p.contains("{case_text}"));
        assert_eq!(
            p,
            build_query_prompt("Login fails\nafter {upgrade}").unwrap()
        );
        assert!(build_query_prompt(" ").is_err());
    }

    #[test]
    fn render_does_not_rescan_values() {
        assert_eq!(
            render_template("a {x} b {y}", &[("x", "{y}"), ("y", "Y")]),
            "a {y} b Y"
        );
        assert_eq!(render_template("{ {x", &[("x", "1")]), "{ {x");
    }

    #[test]
    fn generate_query_with_mock() {
        let case = preprocess_case(&SupportCase::new(
            "c7",
            "Broker TLS handshake fails",
            "After renewing certs clients cannot connect",
        ))
        .unwrap();
        let g = MockGenerator::new();
        let q = generate_query(&case, &g, &GenerationParams::default()).unwrap();
        assert_eq!(
            q.text,
            "How do I resolve broker tls handshake fails after renewing certs clients cannot connect?"
        );
        assert_eq!(q.source_case_id, "c7");
        assert_eq!(
            q,
            generate_query(&case, &g, &GenerationParams::default()).unwrap()
        );
    }

    #[test]
    fn generate_query_errors() {
        let raw = SupportCase::new("c", "s", "d");
        assert!(generate_query(&raw, &MockGenerator::new(), &GenerationParams::default()).is_err());
        let case = preprocess_case(&raw).unwrap();
        let g = MockGenerator::new().with_response(QUERY_TEMPLATE_HEADER, "\n \n");
        assert!(matches!(
            generate_query(&case, &g, &GenerationParams::default()),
            Err(Error::Generation(_))
        ));
        let g = MockGenerator::new().with_response(QUERY_TEMPLATE_HEADER, "two\nlines");
        assert_eq!(
            generate_query(&case, &g, &GenerationParams::default())
                .unwrap()
                .text,
            "two lines"
        );
    }

    proptest! {
        #[test]
        fn first_question_is_idempotent_prefix(s in "[a-zA-Z .!?\n]{1,60}") {
            prop_assume!(!s.trim().is_empty());
            let q = first_question(&s).unwrap();
            prop_assert!(s.trim().starts_with(&q));
            prop_assert_eq!(first_question(&q).unwrap(), q);
        }
    }
}
