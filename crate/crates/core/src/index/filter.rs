//! Metadata filter expressions: conjunctions of equality and set membership.
//!
//! Text form: `key=value and key2 in {a,b,c}`. A predicate over a missing
//! key is false.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FilterParseError {
    #[error("empty predicate in filter expression")]
    EmptyPredicate,
    #[error("malformed predicate {0:?}: expected `key=value` or `key in {{a,b}}`")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    Equals { key: String, value: String },
    In { key: String, values: Vec<String> },
}

impl Predicate {
    fn holds(&self, metadata: &BTreeMap<String, String>) -> bool {
        match self {
            Predicate::Equals { key, value } => metadata.get(key) == Some(value),
            Predicate::In { key, values } => metadata
                .get(key)
                .map(|v| values.iter().any(|w| w == v))
                .unwrap_or(false),
        }
    }
}

/// Conjunction of predicates. The empty conjunction is true for every entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct FilterExpr {
    pub predicates: Vec<Predicate>,
}

impl FilterExpr {
    pub fn matches(&self, metadata: &BTreeMap<String, String>) -> bool {
        self.predicates.iter().all(|p| p.holds(metadata))
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, FilterParseError> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Self::default());
        }
        let mut predicates = Vec::new();
        for raw in text.split(" and ") {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(FilterParseError::EmptyPredicate);
            }
            if let Some((key, rest)) = raw.split_once(" in ") {
                let rest = rest.trim();
                let inner = rest
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| FilterParseError::Malformed(raw.to_string()))?;
                let values: Vec<String> = inner
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect();
                if values.is_empty() {
                    return Err(FilterParseError::Malformed(raw.to_string()));
                }
                predicates.push(Predicate::In {
                    key: key.trim().to_string(),
                    values,
                });
            } else if let Some((key, value)) = raw.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                if key.is_empty() || value.is_empty() {
                    return Err(FilterParseError::Malformed(raw.to_string()));
                }
                predicates.push(Predicate::Equals {
                    key: key.to_string(),
                    value: value.to_string(),
                });
            } else {
                return Err(FilterParseError::Malformed(raw.to_string()));
            }
        }
        Ok(Self { predicates })
    }
}
