//! Naive forward chaining to the least fixpoint.

use super::engine::match_literal;
use super::{check_prereq, FactBase, Provenance};
use crate::lopat::{Binding, Literal, Predicate, RuleBase, RuleKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForwardError {
    #[error("rule `{0}` is not range-restricted")]
    NotRangeRestricted(String),
}

/// Closes `facts` under every rule. SatC conclusions, including SatC facts
/// given as input, are kept only when their prerequisites are facts.
pub fn forward_close(facts: &FactBase, rules: &RuleBase) -> Result<FactBase, ForwardError> {
    if let Some(r) = rules.rules().iter().find(|r| !r.is_ground() && !r.is_range_restricted()) {
        return Err(ForwardError::NotRangeRestricted(r.to_string()));
    }
    let mut raw = facts.clone();
    for rule in rules.rules().iter().filter(|r| r.kind == RuleKind::Fact) {
        raw.insert(rule.head.clone(), Provenance::Asserted).expect("validated facts are ground");
    }
    let admissible = |l: &Literal| l.predicate != Predicate::SatC || check_prereq(&l.args[0].name, &l.args[1].name, &raw);

    let mut closed = FactBase::new();
    for fact in raw.iter().filter(|f| admissible(f)) {
        for p in raw.provenance(fact).into_iter().flatten() {
            closed.insert(fact.clone(), *p).expect("ground");
        }
    }

    let derivers: Vec<_> = rules.rules().iter().filter(|r| r.kind != RuleKind::Fact).collect();
    loop {
        let mut fresh = Vec::new();
        for rule in &derivers {
            for b in join(&rule.body, &closed) {
                let head = rule.head.apply(&b);
                if !closed.contains(&head) && admissible(&head) {
                    fresh.push(head);
                }
            }
        }
        if fresh.is_empty() {
            return Ok(closed);
        }
        for f in fresh {
            closed.insert(f, Provenance::Derived).expect("range-restricted heads are ground");
        }
    }
}

/// All bindings under which every body literal is in `facts`.
fn join(body: &[Literal], facts: &FactBase) -> Vec<Binding> {
    let mut bindings = vec![Binding::new()];
    for lit in body {
        let mut next = Vec::new();
        for b in &bindings {
            let pattern = lit.apply(b);
            if pattern.is_ground() {
                if facts.contains(&pattern) {
                    next.push(b.clone());
                }
                continue;
            }
            let first = &pattern.args[0];
            let candidates: Box<dyn Iterator<Item = &Literal>> = if first.is_constant() {
                Box::new(facts.lookup(pattern.predicate, &first.name))
            } else {
                Box::new(facts.with_predicate(pattern.predicate))
            };
            next.extend(candidates.filter_map(|f| match_literal(&pattern, f, b)));
        }
        bindings = next;
        if bindings.is_empty() {
            break;
        }
    }
    bindings
}
