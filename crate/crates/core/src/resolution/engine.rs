//! Backward-chaining query engine.
//!
//! A ground goal is settled by, in order: the PreReq gate (SatC only), a
//! direct fact match, and then expansion through rules whose head matches
//! the goal, tried in declaration order. Body literals are selected ground
//! first, then containment literals matched against facts, and finally any
//! remaining variable is enumerated over the constants of its sort.
//!
//! A goal re-entered while it is being derived fails (cycle guard).
//! Successes are memoised; failures are memoised only when they do not
//! depend on a cut made at a shallower goal, which keeps memoisation sound
//! in the presence of cycles.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::trace::{DerivationTrace, TraceNode};
use super::{FactBase, Provenance, Query};
use crate::lopat::{Binding, Literal, Predicate, Rule, RuleBase, RuleKind, Sort, Term};

/// Search limits for one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_depth: usize,
    pub max_steps: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_depth: 64, max_steps: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NoDerivation,
    Cycle,
    Budget,
    Prereq,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::NoDerivation => "no derivation",
            FailureReason::Cycle => "cycle",
            FailureReason::Budget => "budget",
            FailureReason::Prereq => "prereq",
        })
    }
}

/// Outcome of a query or goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub satisfied: bool,
    /// Why the first failing goal failed.
    pub reason: Option<FailureReason>,
    /// Permission of the `Do` request when every goal holds.
    pub permission: Option<String>,
    pub trace: DerivationTrace,
    pub steps: usize,
    /// Query constants that no fact or rule mentions.
    pub unknown_constants: Vec<Term>,
}

struct Exhausted;

struct Outcome {
    ok: bool,
    /// Shallowest in-progress goal this failure depended on.
    low: usize,
    reason: Option<FailureReason>,
    node: TraceNode,
}

const NO_CUT: usize = usize::MAX;
const MAX_FAILURE_NODES: usize = 8;

/// A reusable engine over one fact base and rule base. Memoised results are
/// kept between goals.
pub struct Resolver<'a> {
    rules: &'a RuleBase,
    raw: FactBase,
    universe: BTreeMap<Sort, Vec<Term>>,
    limits: Limits,
    cache: HashMap<Literal, Result<(), FailureReason>>,
    in_progress: HashMap<Literal, usize>,
    steps: usize,
}

impl<'a> Resolver<'a> {
    pub fn new(facts: &FactBase, rules: &'a RuleBase, limits: Limits) -> Self {
        let mut raw = facts.clone();
        for rule in rules.rules() {
            if rule.kind == RuleKind::Fact {
                raw.insert(rule.head.clone(), Provenance::Asserted).expect("validated facts are ground");
            }
        }
        let mut universe: BTreeMap<Sort, BTreeSet<Term>> = BTreeMap::new();
        for fact in raw.iter() {
            for t in &fact.args {
                universe.entry(t.sort).or_default().insert(t.clone());
            }
        }
        for rule in rules.rules() {
            for t in rule.literals().flat_map(|l| l.args.iter()).filter(|t| t.is_constant()) {
                universe.entry(t.sort).or_default().insert(t.clone());
            }
        }
        let universe = universe.into_iter().map(|(s, set)| (s, set.into_iter().collect())).collect();
        Resolver { rules, raw, universe, limits, cache: HashMap::new(), in_progress: HashMap::new(), steps: 0 }
    }

    pub fn knows(&self, term: &Term) -> bool {
        self.universe.get(&term.sort).is_some_and(|v| v.contains(term))
    }

    /// Settles one ground SatC or SatNS goal with a fresh step budget.
    pub fn prove_goal(&mut self, goal: &Literal) -> Resolution {
        self.steps = 0;
        let (ok, reason, node) = self.top(goal);
        Resolution {
            satisfied: ok,
            reason,
            permission: None,
            trace: DerivationTrace { request: None, roots: vec![node] },
            steps: self.steps,
            unknown_constants: self.unknown(std::slice::from_ref(goal)),
        }
    }

    /// Resolves every goal of a query against one shared step budget.
    pub fn resolve_query(&mut self, query: &Query) -> Resolution {
        self.steps = 0;
        let mut roots = Vec::new();
        let mut reason = None;
        let mut satisfied = true;
        for goal in query.goals() {
            let (ok, r, node) = self.top(goal);
            roots.push(node);
            if !ok {
                satisfied = false;
                reason = r;
                break;
            }
        }
        Resolution {
            satisfied,
            reason,
            permission: satisfied.then(|| query.permission().to_string()),
            trace: DerivationTrace { request: Some(query.request().clone()), roots },
            steps: self.steps,
            unknown_constants: self.unknown(
                &std::iter::once(query.request().clone()).chain(query.goals().iter().cloned()).collect::<Vec<_>>(),
            ),
        }
    }

    fn unknown(&self, lits: &[Literal]) -> Vec<Term> {
        let mut out: Vec<Term> = Vec::new();
        for t in lits.iter().flat_map(|l| l.args.iter()) {
            let ignorable = matches!(t.sort, Sort::Permission | Sort::Resource | Sort::Action);
            if !ignorable && !self.knows(t) && !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    fn top(&mut self, goal: &Literal) -> (bool, Option<FailureReason>, TraceNode) {
        self.in_progress.clear();
        match self.prove(goal, 0) {
            Ok(o) => (o.ok, o.reason, o.node),
            Err(Exhausted) => {
                self.in_progress.clear();
                (
                    false,
                    Some(FailureReason::Budget),
                    TraceNode::Goal {
                        literal: goal.clone(),
                        satisfied: false,
                        children: vec![TraceNode::Failure { literal: goal.clone(), reason: FailureReason::Budget }],
                    },
                )
            }
        }
    }

    fn tick(&mut self, depth: usize) -> Result<(), Exhausted> {
        self.steps += 1;
        if self.steps > self.limits.max_steps || depth > self.limits.max_depth {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    fn prereq_nodes(&self, goal: &Literal) -> (bool, Vec<TraceNode>) {
        let (c, p) = (&goal.args[0].name, &goal.args[1].name);
        let mut met = true;
        let mut nodes = Vec::new();
        for pr in self.raw.lookup(Predicate::PreReq, c).filter(|l| &l.args[1].name == p) {
            let prerequisite = Literal::sat_c(&pr.args[2].name, &pr.args[3].name);
            let ok = self.raw.contains(&prerequisite);
            met &= ok;
            nodes.push(TraceNode::PrereqCheck { subject: goal.clone(), prerequisite, met: ok });
        }
        (met, nodes)
    }

    fn prove(&mut self, goal: &Literal, depth: usize) -> Result<Outcome, Exhausted> {
        self.tick(depth)?;
        if let Some(cached) = self.cache.get(goal) {
            return Ok(Outcome {
                ok: cached.is_ok(),
                low: NO_CUT,
                reason: cached.err(),
                node: TraceNode::Cached { literal: goal.clone(), satisfied: cached.is_ok() },
            });
        }
        if let Some(&d) = self.in_progress.get(goal) {
            return Ok(Outcome {
                ok: false,
                low: d,
                reason: Some(FailureReason::Cycle),
                node: TraceNode::Failure { literal: goal.clone(), reason: FailureReason::Cycle },
            });
        }

        let mut children = Vec::new();
        let finish = |ok: bool, children: Vec<TraceNode>| TraceNode::Goal { literal: goal.clone(), satisfied: ok, children };

        if goal.predicate == Predicate::SatC {
            let (met, checks) = self.prereq_nodes(goal);
            children.extend(checks);
            if !met {
                children.push(TraceNode::Failure { literal: goal.clone(), reason: FailureReason::Prereq });
                self.cache.insert(goal.clone(), Err(FailureReason::Prereq));
                return Ok(Outcome { ok: false, low: NO_CUT, reason: Some(FailureReason::Prereq), node: finish(false, children) });
            }
        }

        if let Some(provs) = self.raw.provenance(goal) {
            children.push(TraceNode::FactMatch { literal: goal.clone(), provenance: provs.iter().copied().collect() });
            self.cache.insert(goal.clone(), Ok(()));
            return Ok(Outcome { ok: true, low: NO_CUT, reason: None, node: finish(true, children) });
        }

        self.in_progress.insert(goal.clone(), depth);
        let mut low = NO_CUT;
        let mut ok = false;
        let mut saw_cycle = false;
        let mut expanded = false;
        let rules = self.rules;
        for (index, rule) in rules.rules().iter().enumerate() {
            if rule.kind == RuleKind::Fact || rule.head.predicate != goal.predicate {
                continue;
            }
            let Some(binding) = match_literal(&rule.head, goal, &Binding::new()) else { continue };
            expanded = true;
            let mut path = Vec::new();
            let mut failures = Vec::new();
            let mut ctx = BodyCtx { low: NO_CUT, cycle: false };
            let found = self.solve(&rule.body, binding, depth + 1, &mut path, &mut failures, &mut ctx)?;
            low = low.min(ctx.low);
            saw_cycle |= ctx.cycle;
            match found {
                Some(b) => {
                    let instance = rule.substitute(&b).expect("bindings respect sorts");
                    children.push(TraceNode::RuleExpansion { index, instance, satisfied: true, children: path });
                    ok = true;
                    break;
                }
                None => {
                    let instance = rule.substitute(&binding_of_head(rule, goal)).expect("bindings respect sorts");
                    children.push(TraceNode::RuleExpansion { index, instance, satisfied: false, children: failures });
                }
            }
        }
        self.in_progress.remove(goal);

        if ok {
            self.cache.insert(goal.clone(), Ok(()));
            return Ok(Outcome { ok: true, low: NO_CUT, reason: None, node: finish(true, children) });
        }
        let reason = if saw_cycle { FailureReason::Cycle } else { FailureReason::NoDerivation };
        if !expanded {
            children.push(TraceNode::Failure { literal: goal.clone(), reason });
        }
        if low >= depth {
            self.cache.insert(goal.clone(), Err(reason));
        }
        Ok(Outcome { ok: false, low, reason: Some(reason), node: finish(false, children) })
    }

    /// Settles a ground body literal.
    fn holds(&mut self, lit: &Literal, depth: usize, ctx: &mut BodyCtx) -> Result<(bool, TraceNode), Exhausted> {
        match lit.predicate {
            Predicate::SatC | Predicate::SatNS => {
                let o = self.prove(lit, depth)?;
                if !o.ok {
                    ctx.low = ctx.low.min(o.low);
                    ctx.cycle |= o.reason == Some(FailureReason::Cycle);
                }
                Ok((o.ok, o.node))
            }
            _ => {
                self.tick(depth)?;
                Ok(match self.raw.provenance(lit) {
                    Some(p) => (true, TraceNode::FactMatch { literal: lit.clone(), provenance: p.iter().copied().collect() }),
                    None => (false, TraceNode::Failure { literal: lit.clone(), reason: FailureReason::NoDerivation }),
                })
            }
        }
    }

    /// Finds the first binding that satisfies every literal; `path` holds
    /// the justification of the binding found.
    fn solve(
        &mut self,
        lits: &[Literal],
        binding: Binding,
        depth: usize,
        path: &mut Vec<TraceNode>,
        failures: &mut Vec<TraceNode>,
        ctx: &mut BodyCtx,
    ) -> Result<Option<Binding>, Exhausted> {
        if lits.is_empty() {
            return Ok(Some(binding));
        }
        let applied: Vec<Literal> = lits.iter().map(|l| l.apply(&binding)).collect();

        if let Some(i) = applied.iter().position(Literal::is_ground) {
            let rest = without(lits, i);
            let (ok, node) = self.holds(&applied[i], depth, ctx)?;
            if !ok {
                if failures.len() < MAX_FAILURE_NODES {
                    failures.push(node);
                }
                return Ok(None);
            }
            path.push(node);
            let found = self.solve(&rest, binding, depth, path, failures, ctx)?;
            if found.is_none() {
                path.pop();
            }
            return Ok(found);
        }

        if let Some(i) = applied.iter().position(|l| matches!(l.predicate, Predicate::HasC | Predicate::HasNS)) {
            let pattern = &applied[i];
            let rest = without(lits, i);
            let first = &pattern.args[0];
            let candidates: Vec<Literal> = if first.is_constant() {
                self.raw.lookup(pattern.predicate, &first.name).cloned().collect()
            } else {
                self.raw.with_predicate(pattern.predicate).cloned().collect()
            };
            for fact in candidates {
                self.tick(depth)?;
                let Some(b) = match_literal(pattern, &fact, &binding) else { continue };
                let provenance = self.raw.provenance(&fact).map(|p| p.iter().copied().collect()).unwrap_or_default();
                path.push(TraceNode::FactMatch { literal: fact, provenance });
                if let Some(found) = self.solve(&rest, b, depth, path, failures, ctx)? {
                    return Ok(Some(found));
                }
                path.pop();
            }
            if failures.len() < MAX_FAILURE_NODES {
                failures.push(TraceNode::Failure { literal: pattern.clone(), reason: FailureReason::NoDerivation });
            }
            return Ok(None);
        }

        let var = applied.iter().flat_map(Literal::variables).next().expect("non-ground literal has a variable").clone();
        let domain = self.universe.get(&var.sort).cloned().unwrap_or_default();
        for value in domain {
            self.tick(depth)?;
            let mut b = binding.clone();
            b.insert(var.name.clone(), value);
            if let Some(found) = self.solve(lits, b, depth, path, failures, ctx)? {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }
}

struct BodyCtx {
    low: usize,
    cycle: bool,
}

fn without(lits: &[Literal], i: usize) -> Vec<Literal> {
    lits.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, l)| l.clone()).collect()
}

fn binding_of_head(rule: &Rule, goal: &Literal) -> Binding {
    match_literal(&rule.head, goal, &Binding::new()).unwrap_or_default()
}

/// One-way matching of a pattern against a ground literal, extending
/// `binding`.
pub(crate) fn match_literal(pattern: &Literal, ground: &Literal, binding: &Binding) -> Option<Binding> {
    if pattern.predicate != ground.predicate || pattern.args.len() != ground.args.len() {
        return None;
    }
    let mut b = binding.clone();
    for (p, g) in pattern.args.iter().zip(&ground.args) {
        if p.is_constant() {
            if p != g {
                return None;
            }
            continue;
        }
        if p.sort != g.sort {
            return None;
        }
        match b.get(&p.name) {
            Some(v) if v != g => return None,
            Some(_) => {}
            None => {
                b.insert(p.name.clone(), g.clone());
            }
        }
    }
    Some(b)
}

/// False iff some `PreReq((component,property),(c2,p2))` fact exists whose
/// prerequisite `SatC(c2,p2)` is not itself a fact.
pub fn check_prereq(component: &str, property: &str, facts: &FactBase) -> bool {
    let property = Term::constant(property, Sort::Property).name;
    facts
        .lookup(Predicate::PreReq, component)
        .filter(|l| l.args[1].name == property)
        .all(|l| facts.contains(&Literal::sat_c(&l.args[2].name, &l.args[3].name)))
}

/// Resolves a query: every SatNS goal must hold.
pub fn resolve(query: &Query, facts: &FactBase, rules: &RuleBase, limits: Limits) -> Resolution {
    Resolver::new(facts, rules, limits).resolve_query(query)
}

/// Resolves a single component-property goal.
pub fn cp_resolve(goal: &Literal, facts: &FactBase, rules: &RuleBase, limits: Limits) -> Resolution {
    Resolver::new(facts, rules, limits).prove_goal(goal)
}
