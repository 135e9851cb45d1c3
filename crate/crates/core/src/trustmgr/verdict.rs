//! Verdicts and their export formats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::authority::Phase;

/// Three-valued trust status, ordered so that aggregation is a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Trusted,
    Uncertain,
    Untrusted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Trusted => "trusted",
            Status::Uncertain => "uncertain",
            Status::Untrusted => "untrusted",
        })
    }
}

impl FromStr for Status {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trusted" => Ok(Status::Trusted),
            "uncertain" | "suspicious" => Ok(Status::Uncertain),
            "untrusted" => Ok(Status::Untrusted),
            other => Err(ExportError::Field(format!("status `{other}`"))),
        }
    }
}

/// Supremum under trusted < uncertain < untrusted. An empty slice has no
/// members to distrust and aggregates to trusted.
pub fn aggregate(statuses: impl IntoIterator<Item = Status>) -> Status {
    statuses.into_iter().max().unwrap_or(Status::Trusted)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnfVerdict {
    pub vnf_id: String,
    pub vm_id: String,
    pub status: Status,
    /// Normalised requirement constants that failed, in evaluation order.
    pub failing: Vec<String>,
    pub reason: Option<String>,
    pub certificate_id: Option<String>,
    /// Key of the derivation trace in the evaluation report.
    pub trace_ref: Option<String>,
}

impl VnfVerdict {
    /// Checks the status/failing-list invariants.
    pub fn is_consistent(&self) -> bool {
        match self.status {
            Status::Trusted => self.failing.is_empty(),
            Status::Untrusted => !self.failing.is_empty(),
            Status::Uncertain => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceVerdict {
    pub slice: String,
    pub phase: Phase,
    pub members: Vec<VnfVerdict>,
    pub aggregate: Status,
    pub evaluated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExportError {
    #[error("verdict export line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("verdict export: bad {0}")]
    Field(String),
    #[error("verdict export: missing `{0}`")]
    Missing(&'static str),
    #[error("verdict json: {0}")]
    Json(String),
}

fn opt(v: &Option<String>) -> String {
    match v {
        Some(s) => escape(s),
        None => "-".into(),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '-' if s == "-" => out.push_str("\\-"),
            ',' => out.push_str("\\,"),
            c => out.push(c),
        }
    }
    if s.is_empty() {
        return "\\e".into();
    }
    out
}

fn unescape(s: &str) -> String {
    if s == "\\e" {
        return String::new();
    }
    let mut out = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn unopt(s: &str) -> Option<String> {
    (s != "-").then(|| unescape(s))
}

/// Splits on commas not preceded by a backslash.
fn split_list(s: &str) -> Vec<String> {
    if s == "-" {
        return Vec::new();
    }
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                cur.push(c);
                if let Some(n) = chars.next() {
                    cur.push(n);
                }
            }
            ',' => items.push(unescape(&std::mem::take(&mut cur))),
            c => cur.push(c),
        }
    }
    items.push(unescape(&cur));
    items
}

impl SliceVerdict {
    /// Line-oriented export:
    ///
    /// ```text
    /// slice <id>
    /// phase <phase>
    /// aggregate <status>
    /// evaluated_at <tick>
    /// member <vnf> <vm> <status> <failing,...|-> <certificate|-> <trace|-> <reason|->
    /// ```
    ///
    /// Fields are tab separated; tabs, newlines, commas and backslashes in
    /// values are escaped.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "slice\t{}\nphase\t{}\naggregate\t{}\nevaluated_at\t{}\n",
            escape(&self.slice),
            self.phase,
            self.aggregate,
            self.evaluated_at
        );
        for m in &self.members {
            let failing =
                if m.failing.is_empty() { "-".to_string() } else { m.failing.iter().map(|f| escape(f)).collect::<Vec<_>>().join(",") };
            out.push_str(&format!(
                "member\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                escape(&m.vnf_id),
                escape(&m.vm_id),
                m.status,
                failing,
                opt(&m.certificate_id),
                opt(&m.trace_ref),
                opt(&m.reason)
            ));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<SliceVerdict, ExportError> {
        let mut slice = None;
        let mut phase = None;
        let mut aggregate = None;
        let mut evaluated_at = None;
        let mut members = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |d: &str| ExportError::Line { line: i + 1, detail: d.to_string() };
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["slice", s] => slice = Some(unescape(s)),
                ["phase", p] => phase = Some(p.parse::<Phase>().map_err(|e| bad(&e))?),
                ["aggregate", s] => aggregate = Some(s.parse::<Status>()?),
                ["evaluated_at", t] => evaluated_at = Some(t.parse::<u64>().map_err(|_| bad("evaluated_at"))?),
                ["member", vnf, vm, status, failing, cert, trace, reason] => members.push(VnfVerdict {
                    vnf_id: unescape(vnf),
                    vm_id: unescape(vm),
                    status: status.parse()?,
                    failing: split_list(failing),
                    certificate_id: unopt(cert),
                    trace_ref: unopt(trace),
                    reason: unopt(reason),
                }),
                _ => return Err(bad("unrecognised line")),
            }
        }
        Ok(SliceVerdict {
            slice: slice.ok_or(ExportError::Missing("slice"))?,
            phase: phase.ok_or(ExportError::Missing("phase"))?,
            aggregate: aggregate.ok_or(ExportError::Missing("aggregate"))?,
            evaluated_at: evaluated_at.ok_or(ExportError::Missing("evaluated_at"))?,
            members,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdicts serialize")
    }

    pub fn from_json(text: &str) -> Result<SliceVerdict, ExportError> {
        serde_json::from_str(text).map_err(|e| ExportError::Json(e.to_string()))
    }

    pub fn flagged(&self) -> impl Iterator<Item = &VnfVerdict> {
        self.members.iter().filter(|m| m.status != Status::Trusted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supremum() {
        use Status::*;
        assert_eq!(aggregate([Trusted, Trusted]), Trusted);
        assert_eq!(aggregate([Trusted, Uncertain]), Uncertain);
        assert_eq!(aggregate([Uncertain, Untrusted, Trusted]), Untrusted);
    }

    #[test]
    fn text_round_trip_with_awkward_values() {
        let v = SliceVerdict {
            slice: "ns400".into(),
            phase: Phase::Active,
            members: vec![
                VnfVerdict {
                    vnf_id: "vnf3".into(),
                    vm_id: "vm3".into(),
                    status: Status::Untrusted,
                    failing: vec!["no_malware".into(), "a,b".into()],
                    reason: Some("tab\there, new\nline -".into()),
                    certificate_id: Some("00004".into()),
                    trace_ref: None,
                },
                VnfVerdict {
                    vnf_id: "-".into(),
                    vm_id: "".into(),
                    status: Status::Trusted,
                    failing: vec![],
                    reason: Some("-".into()),
                    certificate_id: None,
                    trace_ref: Some("ns400/vnf1".into()),
                },
            ],
            aggregate: Status::Untrusted,
            evaluated_at: 15,
        };
        assert_eq!(SliceVerdict::parse_text(&v.to_text()).unwrap(), v);
        assert_eq!(SliceVerdict::from_json(&v.to_json()).unwrap(), v);
    }
}
