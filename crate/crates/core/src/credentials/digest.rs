//! Hashed digest reports produced at attestation time.
//!
//! Line format, `#` starts a comment:
//!
//! ```text
//! slice ns400
//! reporter vim-1
//! timestamp 1700000000
//! component vnf3 SHA2 9f86d0...
//! component vm3 SHA2 2c26b4... parent=vnf3
//! component cfg3 parent=vm3
//! ```
//!
//! A component without a parent belongs directly to the slice. A parent
//! must be declared on an earlier line.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CredentialError, HashAlgorithm};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub algorithm: HashAlgorithm,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestEntry {
    pub id: String,
    pub measurement: Option<Measurement>,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestReport {
    pub slice: String,
    pub reporter: String,
    pub timestamp: u64,
    pub components: Vec<DigestEntry>,
}

impl DigestReport {
    pub fn new(slice: impl Into<String>, reporter: impl Into<String>, timestamp: u64) -> Self {
        DigestReport { slice: slice.into(), reporter: reporter.into(), timestamp, components: Vec::new() }
    }

    /// Appends a component, enforcing unique ids, declared parents and
    /// well-formed digests.
    pub fn push(&mut self, entry: DigestEntry) -> Result<(), CredentialError> {
        if self.components.iter().any(|c| c.id == entry.id) {
            return Err(CredentialError::DuplicateComponent(entry.id));
        }
        if let Some(parent) = &entry.parent {
            if !self.components.iter().any(|c| &c.id == parent) {
                return Err(CredentialError::UnknownParent { component: entry.id, parent: parent.clone() });
            }
        }
        if let Some(m) = &entry.measurement {
            if !m.algorithm.is_well_formed(&m.digest) {
                return Err(CredentialError::MalformedHex { path: entry.id.clone(), value: m.digest.clone() });
            }
        }
        self.components.push(entry);
        Ok(())
    }

    /// Top-level components of the slice.
    pub fn roots(&self) -> impl Iterator<Item = &DigestEntry> {
        self.components.iter().filter(|c| c.parent.is_none())
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a DigestEntry> + 'a {
        self.components.iter().filter(move |c| c.parent.as_deref() == Some(id))
    }

    pub fn get(&self, id: &str) -> Option<&DigestEntry> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn parse(text: &str) -> Result<DigestReport, CredentialError> {
        let mut slice = None;
        let mut reporter = None;
        let mut timestamp = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |detail: String| CredentialError::Digest { line: line_no, detail };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let key = words.next().unwrap_or_default();
            let rest: Vec<&str> = words.collect();
            match key {
                "slice" | "reporter" | "timestamp" => {
                    let [value] = rest.as_slice() else {
                        return Err(err(format!("`{key}` takes one value")));
                    };
                    match key {
                        "slice" => slice = Some(value.to_string()),
                        "reporter" => reporter = Some(value.to_string()),
                        _ => {
                            timestamp =
                                Some(value.parse::<u64>().map_err(|_| err(format!("bad timestamp `{value}`")))?)
                        }
                    }
                }
                "component" => {
                    let mut fields = rest.as_slice();
                    let parent = match fields.last().and_then(|f| f.strip_prefix("parent=")) {
                        Some(p) => {
                            fields = &fields[..fields.len() - 1];
                            Some(p.to_string())
                        }
                        None => None,
                    };
                    let (id, measurement) = match fields {
                        [id] => (id.to_string(), None),
                        [id, algo, digest] => {
                            let algorithm: HashAlgorithm = algo.parse()?;
                            (id.to_string(), Some(Measurement { algorithm, digest: digest.to_string() }))
                        }
                        _ => return Err(err("expected `component <id> [<algorithm> <digest>] [parent=<id>]`".into())),
                    };
                    entries.push((line_no, DigestEntry { id, measurement, parent }));
                }
                other => return Err(err(format!("unknown field `{other}`"))),
            }
        }
        let missing = |f: &str| CredentialError::Digest { line: 0, detail: format!("missing `{f}`") };
        let mut report = DigestReport::new(
            slice.ok_or_else(|| missing("slice"))?,
            reporter.ok_or_else(|| missing("reporter"))?,
            timestamp.ok_or_else(|| missing("timestamp"))?,
        );
        for (_, entry) in entries {
            report.push(entry)?;
        }
        Ok(report)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "slice {}", self.slice);
        let _ = writeln!(out, "reporter {}", self.reporter);
        let _ = writeln!(out, "timestamp {}", self.timestamp);
        for c in &self.components {
            out.push_str("component ");
            out.push_str(&c.id);
            if let Some(m) = &c.measurement {
                let _ = write!(out, " {} {}", m.algorithm, m.digest);
            }
            if let Some(p) = &c.parent {
                let _ = write!(out, " parent={p}");
            }
            out.push('\n');
        }
        out
    }

    /// Component ids, for duplicate-free iteration by callers.
    pub fn ids(&self) -> BTreeSet<&str> {
        self.components.iter().map(|c| c.id.as_str()).collect()
    }
}
