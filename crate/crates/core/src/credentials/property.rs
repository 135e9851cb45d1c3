//! Mapping of free-text property strings onto property constants.

use std::collections::{BTreeMap, BTreeSet};

use crate::lopat::{Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PropertyError {
    #[error("property string is empty after normalisation: {0:?}")]
    Empty(String),
}

fn squash(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut gap = false;
    for c in s.trim().chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('_');
            }
            gap = false;
            out.push(c);
        } else {
            gap = true;
        }
    }
    out
}

/// Normalises a property string (and optional value) into a property
/// constant: lowercase, runs of whitespace and punctuation become a single
/// underscore, leading and trailing separators are dropped, and the value is
/// appended as `_<value>`.
///
/// `"No Malware"` becomes `no_malware`; `"Trusted Processes are Running"`
/// with value `10` becomes `trusted_processes_are_running_10`.
pub fn property_string_to_constant(s: &str, value: Option<&str>) -> Result<Term, PropertyError> {
    let mut name = squash(s);
    if name.is_empty() {
        return Err(PropertyError::Empty(s.to_string()));
    }
    if let Some(v) = value {
        let v = squash(v);
        if !v.is_empty() {
            name.push('_');
            name.push_str(&v);
        }
    }
    Ok(Term::constant(name, Sort::Property))
}

/// Two different raw strings that normalise to the same constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub constant: String,
    pub existing: String,
    pub incoming: String,
}

/// Records which raw strings produced which constants so that collisions
/// can be reported.
#[derive(Debug, Clone, Default)]
pub struct PropertyVocabulary {
    seen: BTreeMap<String, BTreeSet<String>>,
}

impl PropertyVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, raw: &str, value: Option<&str>) -> Result<(Term, Option<Collision>), PropertyError> {
        let term = property_string_to_constant(raw, value)?;
        let key = match value {
            Some(v) => format!("{} <{}>", raw.trim(), v.trim()),
            None => raw.trim().to_string(),
        };
        let entry = self.seen.entry(term.name.clone()).or_default();
        let collision = match entry.iter().next() {
            Some(existing) if !entry.contains(&key) => Some(Collision {
                constant: term.name.clone(),
                existing: existing.clone(),
                incoming: key.clone(),
            }),
            _ => None,
        };
        entry.insert(key);
        Ok((term, collision))
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.seen.keys().map(String::as_str)
    }
}
