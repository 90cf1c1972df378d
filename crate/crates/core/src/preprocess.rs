//! Case text cleaning and product alias expansion.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::SupportCase;

/// Drops non-ASCII and control characters (C0, DEL, C1), turns newlines and
/// tabs into spaces, collapses whitespace runs and trims.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars() {
        if c == '\n' || c == '\r' || c == '\t' || c == ' ' {
            pending_space = true;
        } else if c.is_ascii_graphic() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

/// Joins cleaned fields with a single newline; subject alone when the
/// description is empty.
pub fn concat_case(subject: &str, description: &str) -> Result<String> {
    if subject.is_empty() {
        return Err(Error::Validation("subject must be nonempty".into()));
    }
    Ok(if description.is_empty() {
        subject.to_string()
    } else {
        format!("{subject}\n{description}")
    })
}

/// Cleans subject and description and fills `cleaned_text`.
pub fn preprocess_case(case: &SupportCase) -> Result<SupportCase> {
    case.validate()?;
    let subject = clean_text(&case.subject);
    let description = clean_text(&case.description);
    let mut out = case.clone();
    out.cleaned_text = concat_case(&subject, &description)?;
    Ok(out)
}

/// True when `text` satisfies the cleaned-text invariant. The subject and
/// description separator is the only permitted control character.
pub fn is_clean(text: &str) -> bool {
    text.chars()
        .all(|c| c == '\n' || c == ' ' || c.is_ascii_graphic())
}

fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Default)]
pub struct ProductAliasTable {
    // normalized name → aliases in file order
    entries: BTreeMap<String, Vec<String>>,
}

impl ProductAliasTable {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<String>)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (name, aliases) in entries {
            let key = normalize_name(&name);
            if key.is_empty() {
                return Err(Error::Validation(
                    "empty product name in alias table".into(),
                ));
            }
            if aliases.is_empty() {
                return Err(Error::Validation(format!(
                    "product {name:?} has no aliases"
                )));
            }
            if table.insert(key, aliases).is_some() {
                return Err(Error::Validation(format!(
                    "product {name:?} appears twice after case/whitespace normalization"
                )));
            }
        }
        Ok(Self { entries: table })
    }

    /// JSON object mapping product name to a list of aliases.
    pub fn from_json(text: &str) -> Result<Self> {
        // Parsed as a list of pairs so duplicate keys are seen rather than
        // silently overwritten.
        let pairs: DuplicateAwareMap = serde_json::from_str(text)?;
        Self::new(pairs.0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The input name followed by its aliases; the name alone when unknown.
    pub fn expand(&self, product_name: &str) -> Vec<String> {
        let mut out = vec![product_name.to_string()];
        if let Some(aliases) = self.entries.get(&normalize_name(product_name)) {
            out.extend(aliases.iter().cloned());
        }
        out
    }
}

pub fn expand_product(product_name: &str, table: &ProductAliasTable) -> Vec<String> {
    table.expand(product_name)
}

struct DuplicateAwareMap(Vec<(String, Vec<String>)>);

impl<'de> serde::Deserialize<'de> for DuplicateAwareMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = DuplicateAwareMap;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of product name to alias list")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = map.next_entry::<String, Vec<String>>()? {
                    out.push(entry);
                }
                Ok(DuplicateAwareMap(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clean_text_examples() {
        assert_eq!(clean_text("ab\u{001B}c"), "abc");
        assert_eq!(clean_text("café"), "caf");
        assert_eq!(clean_text("plain ASCII"), "plain ASCII");
        assert_eq!(clean_text("  line1\n\tline2\r\n "), "line1 line2");
        assert_eq!(clean_text("x\u{0085}y\u{007F}z"), "xyz");
        assert_eq!(clean_text(""), "");
    }

    #[test]
    fn concat_examples() {
        assert_eq!(concat_case("S", "D").unwrap(), "S\nD");
        assert_eq!(concat_case("S", "").unwrap(), "S");
        assert_eq!(
            concat_case("Login fails", "Seen after upgrade").unwrap(),
            "Login fails\nSeen after upgrade"
        );
        assert!(concat_case("", "D").is_err());
    }

    #[test]
    fn preprocess_sets_clean_text() {
        let case = SupportCase::new("c1", "Login\u{00e9} fails", "Seen\u{001B} after\tupgrade");
        let out = preprocess_case(&case).unwrap();
        assert_eq!(out.cleaned_text, "Login fails\nSeen after upgrade");
        assert!(is_clean(&out.cleaned_text));
        // Subject that cleans to nothing is invalid.
        assert!(preprocess_case(&SupportCase::new("c2", "ééé", "d")).is_err());
    }

    #[test]
    fn alias_expansion() {
        let table = ProductAliasTable::from_json(
            r#"{"Alpha Server": ["AS"], "Beta DB": ["BDB", "Beta Database"]}"#,
        )
        .unwrap();
        assert_eq!(table.expand("Alpha Server"), vec!["Alpha Server", "AS"]);
        assert_eq!(table.expand("Unknown Product"), vec!["Unknown Product"]);
        assert_eq!(table.expand("alpha server"), vec!["alpha server", "AS"]);
        assert_eq!(
            table.expand("  ALPHA   server "),
            vec!["  ALPHA   server ", "AS"]
        );
        assert_eq!(
            expand_product("Beta DB", &table),
            vec!["Beta DB", "BDB", "Beta Database"]
        );
    }

    #[test]
    fn alias_table_invariants() {
        assert!(ProductAliasTable::from_json(r#"{"A": []}"#).is_err());
        assert!(ProductAliasTable::from_json(r#"{"Alpha": ["x"], "ALPHA": ["y"]}"#).is_err());
        assert!(ProductAliasTable::from_json(r#"["not a map"]"#).is_err());
    }

    proptest! {
        #[test]
        fn clean_text_idempotent_and_clean(s in "\\PC*|[\\x00-\\x7f]*") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert!(once.chars().all(|c| c.is_ascii_graphic() || c == ' '));
            prop_assert_eq!(once.trim(), once.as_str());
        }

        #[test]
        fn expansion_starts_with_input(name in "[A-Za-z ]{0,16}") {
            let table = ProductAliasTable::from_json(r#"{"Alpha Server": ["AS"]}"#).unwrap();
            prop_assert_eq!(&table.expand(&name)[0], &name);
        }
    }
}
