//! Per-member evaluation: certificate facts against policy requirements.

use std::collections::BTreeSet;

use super::verdict::{Status, VnfVerdict};
use crate::authority::{InfoSnapshot, Phase, ReferenceStore};
use crate::credentials::{
    property_string_to_constant, HashAlgorithm, PolicyRule, PolicyVerdict, PropertyCertificate, PropertyVocabulary,
    PublicKey, Requirements, TrustPolicy,
};
use crate::lopat::{Literal, Predicate, RuleBase};
use crate::resolution::{certificate_facts, DerivationTrace, FactBase, FailureReason, Limits, Provenance, Resolver};

/// Property asserted by the evaluator when the attested hash equals the
/// registered reference.
pub const HASH_IS_VALID: &str = "hash_is_valid";
/// Property asserted by the evaluator when the certificate verifies under
/// the authority key and is inside its validity window.
pub const SIGNATURE_IS_VALID: &str = "digital_signature_is_valid";

/// Everything the evaluator consults besides the snapshot, certificate and
/// policies.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub authority_key: &'a PublicKey,
    pub references: &'a ReferenceStore,
    pub rules: &'a RuleBase,
    pub limits: Limits,
    /// Slice structure facts (HasNS, HasC, measurements).
    pub structure: Option<&'a FactBase>,
}

/// A verdict together with the derivation trace backing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectEvaluation {
    pub verdict: VnfVerdict,
    pub trace: DerivationTrace,
    pub facts: FactBase,
}

/// One requirement turned into a goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub subject: String,
    pub constant: String,
}

impl Goal {
    pub fn literal(&self) -> Literal {
        Literal::sat_c(&self.subject, &self.constant)
    }
}

/// Whether a rule asserts trust or distrust in `phase`, or is silent.
///
/// Pre-deployment consults `bTime` only; an active subject is trusted by a
/// rule only if both labels read Trusted.
pub fn rule_label(rule: &PolicyRule, phase: Phase) -> PolicyVerdict {
    match phase {
        Phase::PreDeployment => rule.boot_time,
        Phase::Active if rule.boot_time == PolicyVerdict::Trusted && rule.run_time == PolicyVerdict::Trusted => {
            PolicyVerdict::Trusted
        }
        Phase::Active => PolicyVerdict::Untrusted,
    }
}

fn requirement_goals(req: &Requirements, subject: &str, phase: Phase, out: &mut Vec<Goal>) {
    let dynamic: &[String] = if phase == Phase::Active { &req.dynamic_props } else { &[] };
    for text in req.static_props.iter().chain(dynamic) {
        if let Ok(c) = property_string_to_constant(text, None) {
            out.push(Goal { subject: subject.to_string(), constant: c.name });
        }
    }
}

/// Goals a rule sets for the member in `phase`: static requirements always,
/// dynamic ones only when active. VNF requirements bind to the VNF id,
/// service-VM requirements to the VM id.
pub fn rule_goals(rule: &PolicyRule, vnf_id: &str, vm_id: &str, phase: Phase) -> Vec<Goal> {
    let mut goals = Vec::new();
    requirement_goals(&rule.vnf, vnf_id, phase, &mut goals);
    requirement_goals(&rule.service_vm, vm_id, phase, &mut goals);
    goals
}

/// The facts the evaluator reasons over: certificate facts, the two
/// evaluator-asserted validity properties, and the slice structure.
pub fn subject_facts(snapshot: &InfoSnapshot, cert: &PropertyCertificate, ctx: &EvalContext<'_>) -> FactBase {
    let mut facts = FactBase::new();
    if let Some(s) = ctx.structure {
        facts.merge(s);
    }
    let mut vocab = PropertyVocabulary::new();
    if let Ok((lits, _)) = certificate_facts(cert, &mut vocab) {
        for l in lits {
            let _ = facts.insert(l, Provenance::PropertyCertificate);
        }
    }
    let signed = cert.check_signature(ctx.authority_key).is_ok() && cert.is_valid_at(snapshot.captured_at);
    // A reference registered for the subject id wins over one for its image.
    let hash_ok = |id: &str, image: &str, value: &str, kind: &str| {
        kind.parse::<HashAlgorithm>()
            .ok()
            .and_then(|a| ctx.references.get(id, a).or_else(|| ctx.references.get(image, a)))
            .is_some_and(|r| r.digest == value.to_ascii_lowercase())
    };
    let sp = &cert.static_props;
    let mut derived = Vec::new();
    if hash_ok(&cert.vnf.id, &snapshot.vnf_static.image, &sp.vnf_hash.value, &sp.vnf_hash.kind) {
        derived.push(Literal::sat_c(&cert.vnf.id, HASH_IS_VALID));
    }
    for vm in &cert.vnf.vnf_map {
        if hash_ok(&vm.vmid, &snapshot.vm_static.image, &sp.service_vm_hash.value, &sp.service_vm_hash.kind) {
            derived.push(Literal::sat_c(&vm.vmid, HASH_IS_VALID));
        }
    }
    if signed {
        derived.push(Literal::sat_c(&cert.vnf.id, SIGNATURE_IS_VALID));
        for vm in &cert.vnf.vnf_map {
            derived.push(Literal::sat_c(&vm.vmid, SIGNATURE_IS_VALID));
        }
    }
    for l in derived {
        let _ = facts.insert(l, Provenance::Derived);
    }
    facts
}

/// Property stems attested both as `<stem>_true` and `<stem>_false` for
/// one of the subjects.
pub fn conflicts(facts: &FactBase, subjects: &[&str]) -> Vec<String> {
    let mut out = BTreeSet::new();
    for subject in subjects {
        let props: BTreeSet<&str> = facts.lookup(Predicate::SatC, subject).map(|l| l.args[1].name.as_str()).collect();
        for p in &props {
            if let Some(stem) = p.strip_suffix("_true") {
                if props.contains(format!("{stem}_false").as_str()) {
                    out.insert(format!("{subject}:{stem}"));
                }
            }
        }
    }
    out.into_iter().collect()
}

fn verdict(
    snapshot: &InfoSnapshot,
    cert: &PropertyCertificate,
    status: Status,
    failing: Vec<String>,
    reason: Option<String>,
) -> VnfVerdict {
    VnfVerdict {
        vnf_id: snapshot.subject.vnf_id.clone(),
        vm_id: snapshot.subject.vm_id.clone(),
        status,
        failing,
        reason,
        certificate_id: Some(cert.info.id.clone()),
        trace_ref: None,
    }
}

/// Evaluates one member against the rules of `policies` for the
/// snapshot's phase.
///
/// A Trusted-labelled rule fails on its first unsatisfied goal, which makes
/// the member untrusted. An Untrusted-labelled rule makes the member
/// untrusted when every one of its goals holds. Evaluation stops at the
/// first untrusted finding. Conflicting attestations, an exhausted search
/// budget, or the absence of any applicable rule leave the member uncertain.
pub fn evaluate_subject(
    snapshot: &InfoSnapshot,
    cert: &PropertyCertificate,
    policies: &[TrustPolicy],
    ctx: &EvalContext<'_>,
) -> SubjectEvaluation {
    let phase = snapshot.phase;
    let vnf = snapshot.subject.vnf_id.as_str();
    let vm = snapshot.subject.vm_id.as_str();
    let facts = subject_facts(snapshot, cert, ctx);
    let mut trace = DerivationTrace::default();
    let done = |v: VnfVerdict, trace: DerivationTrace, facts: FactBase| SubjectEvaluation { verdict: v, trace, facts };

    let clash = conflicts(&facts, &[vnf, vm]);
    if !clash.is_empty() {
        let reason = format!("conflicting attested properties: {}", clash.join(" "));
        return done(verdict(snapshot, cert, Status::Uncertain, Vec::new(), Some(reason)), trace, facts);
    }

    let rules: Vec<&PolicyRule> = policies.iter().flat_map(|p| &p.rules).collect();
    if rules.is_empty() {
        return done(verdict(snapshot, cert, Status::Uncertain, Vec::new(), Some("no policy".into())), trace, facts);
    }

    let mut resolver = Resolver::new(&facts, ctx.rules, ctx.limits);
    let mut exhausted = Vec::new();
    let mut applied = 0usize;
    for rule in rules {
        let goals = rule_goals(rule, vnf, vm, phase);
        if goals.is_empty() {
            continue;
        }
        applied += 1;
        match rule_label(rule, phase) {
            PolicyVerdict::Trusted => {
                for g in &goals {
                    let r = resolver.prove_goal(&g.literal());
                    trace.roots.extend(r.trace.roots);
                    match (r.satisfied, r.reason) {
                        (true, _) => {}
                        (false, Some(FailureReason::Budget)) => {
                            exhausted.push(g.constant.clone());
                            break;
                        }
                        (false, reason) => {
                            let why = reason.map(|r| r.to_string()).unwrap_or_default();
                            let reason = format!("{} not satisfied for {} ({why})", g.constant, g.subject);
                            let v = verdict(snapshot, cert, Status::Untrusted, vec![g.constant.clone()], Some(reason));
                            return done(v, trace, facts);
                        }
                    }
                }
            }
            PolicyVerdict::Untrusted => {
                let mut all = true;
                for g in &goals {
                    let r = resolver.prove_goal(&g.literal());
                    trace.roots.extend(r.trace.roots);
                    if !r.satisfied {
                        if r.reason == Some(FailureReason::Budget) {
                            exhausted.push(g.constant.clone());
                        }
                        all = false;
                        break;
                    }
                }
                if all {
                    let failing = goals.iter().map(|g| g.constant.clone()).collect();
                    let v = verdict(
                        snapshot,
                        cert,
                        Status::Untrusted,
                        failing,
                        Some("matched a rule labelled Untrusted".into()),
                    );
                    return done(v, trace, facts);
                }
            }
        }
    }
    let v = if applied == 0 {
        verdict(snapshot, cert, Status::Uncertain, Vec::new(), Some("no policy".into()))
    } else if !exhausted.is_empty() {
        let reason = format!("resolution budget exhausted on {}", exhausted.join(","));
        verdict(snapshot, cert, Status::Uncertain, Vec::new(), Some(reason))
    } else {
        verdict(snapshot, cert, Status::Trusted, Vec::new(), None)
    };
    done(v, trace, facts)
}
