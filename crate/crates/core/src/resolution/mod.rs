//! Fact bases, fact derivation from credentials, and trust queries.
//!
//! Queries are answered by backward chaining ([`resolve`], [`cp_resolve`]);
//! [`forward_close`] computes the least fixpoint and serves as a reference
//! for the backward engine.

mod derive;
mod engine;
mod forward;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lopat::{Literal, Predicate, Sort, Term};

pub use derive::{
    certificate_facts, derive_facts_from_digest_report, derive_facts_from_property_certs, CertDerivation,
    CertificateCheck, SkipReason, SkippedCertificate,
};
pub use engine::{check_prereq, cp_resolve, resolve, FailureReason, Limits, Resolution, Resolver};
pub use forward::{forward_close, ForwardError};
pub use trace::{DerivationTrace, TraceNode, TRACE_INTERPRETATION};

/// Where a fact came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    DigestReport,
    PropertyCertificate,
    Asserted,
    /// Produced by closing a fact base under rules.
    Derived,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::DigestReport => "digest_report",
            Provenance::PropertyCertificate => "property_certificate",
            Provenance::Asserted => "asserted",
            Provenance::Derived => "derived",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FactError {
    #[error("fact `{0}` is not ground")]
    NotGround(String),
    #[error(transparent)]
    Signature(#[from] crate::lopat::SignatureError),
}

/// Ground literals indexed by predicate and first argument, each with the
/// set of sources that asserted it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactBase {
    facts: BTreeMap<Literal, BTreeSet<Provenance>>,
    index: BTreeMap<(Predicate, String), BTreeSet<Literal>>,
}

impl FactBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a fact; returns `true` if it was not present before. Adding an
    /// existing fact only records the extra provenance.
    pub fn insert(&mut self, fact: Literal, provenance: Provenance) -> Result<bool, FactError> {
        if !fact.is_ground() {
            return Err(FactError::NotGround(fact.to_string()));
        }
        fact.check_signature()?;
        let fresh = !self.facts.contains_key(&fact);
        if fresh {
            let key = (fact.predicate, fact.args[0].name.clone());
            self.index.entry(key).or_default().insert(fact.clone());
        }
        self.facts.entry(fact).or_default().insert(provenance);
        Ok(fresh)
    }

    /// Merges another fact base, keeping all provenance.
    pub fn merge(&mut self, other: &FactBase) {
        for (fact, provs) in &other.facts {
            for p in provs {
                self.insert(fact.clone(), *p).expect("facts in a FactBase are ground");
            }
        }
    }

    pub fn contains(&self, fact: &Literal) -> bool {
        self.facts.contains_key(fact)
    }

    pub fn provenance(&self, fact: &Literal) -> Option<&BTreeSet<Provenance>> {
        self.facts.get(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Literal> {
        self.facts.keys()
    }

    pub fn with_predicate(&self, predicate: Predicate) -> impl Iterator<Item = &Literal> {
        self.facts.keys().filter(move |l| l.predicate == predicate)
    }

    /// Facts of `predicate` whose first argument is `first`.
    pub fn lookup<'a>(&'a self, predicate: Predicate, first: &str) -> impl Iterator<Item = &'a Literal> + 'a {
        self.index.get(&(predicate, first.to_string())).into_iter().flatten()
    }

    /// All constants of the given sort mentioned by some fact.
    pub fn constants(&self, sort: Sort) -> BTreeSet<Term> {
        self.facts.keys().flat_map(|l| l.args.iter()).filter(|t| t.sort == sort).cloned().collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (fact, provs) in &self.facts {
            let provs: Vec<String> = provs.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!("{fact}.  # {}\n", provs.join(",")));
        }
        out
    }
}

impl FromIterator<Literal> for FactBase {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        let mut fb = FactBase::new();
        for l in iter {
            fb.insert(l, Provenance::Asserted).expect("asserted facts must be ground");
        }
        fb
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("query request must be a ground Do literal, found `{0}`")]
    NotDo(String),
    #[error("query goals must be ground SatNS literals, found `{0}`")]
    BadGoal(String),
    #[error("query has no goals")]
    NoGoals,
}

/// A `Do` request together with the SatNS conditions that authorise it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    request: Literal,
    goals: Vec<Literal>,
}

impl Query {
    pub fn new(request: Literal, goals: Vec<Literal>) -> Result<Self, QueryError> {
        if request.predicate != Predicate::Do || !request.is_ground() {
            return Err(QueryError::NotDo(request.to_string()));
        }
        if goals.is_empty() {
            return Err(QueryError::NoGoals);
        }
        if let Some(g) = goals.iter().find(|g| g.predicate != Predicate::SatNS || !g.is_ground()) {
            return Err(QueryError::BadGoal(g.to_string()));
        }
        Ok(Query { request, goals })
    }

    pub fn request(&self) -> &Literal {
        &self.request
    }

    pub fn goals(&self) -> &[Literal] {
        &self.goals
    }

    /// The permission the request asks for (`allow` or `deny`).
    pub fn permission(&self) -> &str {
        &self.request.args[3].name
    }
}
