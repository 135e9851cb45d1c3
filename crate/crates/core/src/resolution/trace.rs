//! Derivation traces and their text export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::engine::FailureReason;
use super::Provenance;
use crate::lopat::{Literal, Rule};

/// How a query's `Do` request relates to its goal list.
pub const TRACE_INTERPRETATION: &str =
    "each goal of the query's SatNS list is resolved in order; the Do literal's permission is granted iff all goals hold";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceNode {
    /// A goal and how it was settled. A satisfied goal has at least one
    /// justifying child.
    Goal { literal: Literal, satisfied: bool, children: Vec<TraceNode> },
    FactMatch { literal: Literal, provenance: Vec<Provenance> },
    RuleExpansion { index: usize, instance: Rule, satisfied: bool, children: Vec<TraceNode> },
    PrereqCheck { subject: Literal, prerequisite: Literal, met: bool },
    /// The goal was settled earlier in the same resolution.
    Cached { literal: Literal, satisfied: bool },
    Failure { literal: Literal, reason: FailureReason },
}

impl TraceNode {
    pub fn children(&self) -> &[TraceNode] {
        match self {
            TraceNode::Goal { children, .. } | TraceNode::RuleExpansion { children, .. } => children,
            _ => &[],
        }
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(TraceNode::size).sum::<usize>()
    }

    fn write(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        let _ = match self {
            TraceNode::Goal { literal, satisfied, .. } => {
                writeln!(out, "goal {literal} {}", if *satisfied { "satisfied" } else { "unsatisfied" })
            }
            TraceNode::FactMatch { literal, provenance } => {
                let p: Vec<String> = provenance.iter().map(|p| p.to_string()).collect();
                writeln!(out, "fact {literal} [{}]", p.join(","))
            }
            TraceNode::RuleExpansion { index, instance, satisfied, .. } => writeln!(
                out,
                "rule #{index} {instance} {}",
                if *satisfied { "satisfied" } else { "failed" }
            ),
            TraceNode::PrereqCheck { subject, prerequisite, met } => {
                writeln!(out, "prereq {subject} needs {prerequisite} {}", if *met { "met" } else { "unmet" })
            }
            TraceNode::Cached { literal, satisfied } => {
                writeln!(out, "cached {literal} {}", if *satisfied { "satisfied" } else { "unsatisfied" })
            }
            TraceNode::Failure { literal, reason } => writeln!(out, "failure {literal} {reason}"),
        };
        for c in self.children() {
            c.write(out, depth + 1);
        }
    }
}

/// The trace of one resolution: a header naming the request, then one tree
/// per goal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationTrace {
    pub request: Option<Literal>,
    pub roots: Vec<TraceNode>,
}

impl DerivationTrace {
    /// Indented text, one node per line; indentation is depth.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(r) = &self.request {
            let _ = writeln!(out, "# request {r}");
            let _ = writeln!(out, "# {TRACE_INTERPRETATION}");
        }
        for root in &self.roots {
            root.write(&mut out, 0);
        }
        out
    }

    pub fn size(&self) -> usize {
        self.roots.iter().map(TraceNode::size).sum()
    }

    /// Checks that every satisfied goal or expansion has a justifying child.
    pub fn is_well_formed(&self) -> bool {
        fn ok(n: &TraceNode) -> bool {
            let justified = match n {
                TraceNode::Goal { satisfied: true, children, .. }
                | TraceNode::RuleExpansion { satisfied: true, children, .. } => !children.is_empty(),
                _ => true,
            };
            justified && n.children().iter().all(ok)
        }
        self.roots.iter().all(ok)
    }
}
