//! The trust manager: information collection, attestation requests, policy
//! retrieval, per-member evaluation and slice aggregation.
//!
//! A slice evaluation walks each member through ten audited steps:
//!
//! | step | from → to   | action                                 |
//! |------|-------------|----------------------------------------|
//! | S1   | T-MANO → NSTE | slice evaluation requested           |
//! | S2   | NSTE → EE   | member dispatched                      |
//! | S3   | EE → IIL    | information requested                  |
//! | S4   | IIL → APIL  | snapshot forwarded                     |
//! | S5   | APIL → TA   | attestation requested                  |
//! | S6   | TA → APIL   | certificate issued                     |
//! | S7   | APIL → EE   | certificate verified and forwarded     |
//! | S8   | EE → PIL    | policies requested                     |
//! | S9   | PIL → EE    | policies returned                      |
//! | S10  | EE → NSTE   | member verdict reported                |

mod ee;
mod schedule;
mod verdict;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

pub use ee::{
    conflicts, evaluate_subject, rule_goals, rule_label, subject_facts, EvalContext, Goal, SubjectEvaluation,
    HASH_IS_VALID, SIGNATURE_IS_VALID,
};
pub use schedule::{Alert, Scheduler, Subscription};
pub use verdict::{aggregate, ExportError, SliceVerdict, Status, VnfVerdict};

pub use crate::authority::{InfoSnapshot, Phase};
use crate::authority::{AuthorityError, TrustedAuthority};
use crate::credentials::{PropertyCertificate, TrustPolicy};
use crate::lopat::{Literal, RuleBase};
use crate::policyrepo::{PolicyRepository, SubjectKind};
use crate::resolution::{FactBase, Limits, Provenance};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrustError {
    #[error("unknown slice `{0}`")]
    UnknownSlice(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("cannot enumerate members of `{slice}`: {detail}")]
    Enumeration { slice: String, detail: String },
    #[error("trusted authority unreachable")]
    AuthorityUnreachable,
    #[error("certificate rejected: {0}")]
    Verification(String),
    #[error(transparent)]
    Authority(#[from] AuthorityError),
    #[error("slice `{0}` already has a subscription")]
    DuplicateSubscription(String),
    #[error("no subscription for `{0}`")]
    UnknownSubscription(String),
    #[error("evaluation interval must be positive")]
    InvalidInterval,
}

/// One VNF placed on one VM.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Member {
    pub vnf_id: String,
    pub vm_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceMembers {
    pub slice: String,
    pub realm: String,
    pub members: Vec<Member>,
}

/// What the information layer needs from the infrastructure.
pub trait Infrastructure {
    fn slice_members(&self, slice: &str) -> Result<SliceMembers, TrustError>;
    /// Current state of a member as seen by the hypervisor and VNF manager.
    fn snapshot(&self, member: &Member, phase: Phase) -> Result<InfoSnapshot, TrustError>;
    fn now(&self) -> u64;
}

/// Where policies come from.
pub trait PolicySource {
    fn fetch(&self, realm: &str, slice: &str, kind: SubjectKind) -> Vec<TrustPolicy>;
}

impl PolicySource for PolicyRepository {
    fn fetch(&self, realm: &str, slice: &str, kind: SubjectKind) -> Vec<TrustPolicy> {
        self.fetch_policies_for_slice(realm, slice, kind)
    }
}

impl<P: PolicySource> PolicySource for RwLock<P> {
    fn fetch(&self, realm: &str, slice: &str, kind: SubjectKind) -> Vec<TrustPolicy> {
        self.read().expect("policy lock").fetch(realm, slice, kind)
    }
}

/// A fixed policy set, filtered like the repository.
impl PolicySource for Vec<TrustPolicy> {
    fn fetch(&self, realm: &str, slice: &str, kind: SubjectKind) -> Vec<TrustPolicy> {
        self.iter()
            .filter_map(|p| {
                let rules: Vec<_> = p
                    .rules
                    .iter()
                    .filter(|r| r.resources == realm && r.matches_slice(slice) && kind.covers(r))
                    .cloned()
                    .collect();
                (!rules.is_empty()).then(|| TrustPolicy { info: p.info.clone(), rules })
            })
            .collect()
    }
}

/// IIL: the member's current snapshot.
pub fn collect_info(infra: &dyn Infrastructure, member: &Member, phase: Phase) -> Result<InfoSnapshot, TrustError> {
    infra.snapshot(member, phase)
}

/// PIL: every policy with rules addressing the VNF or the service VM of a
/// member of `slice` in `realm`, each rule once.
pub fn fetch_member_policies(source: &dyn PolicySource, realm: &str, slice: &str) -> Vec<TrustPolicy> {
    let mut out: Vec<TrustPolicy> = source.fetch(realm, slice, SubjectKind::Vnf);
    for p in source.fetch(realm, slice, SubjectKind::ServiceVm) {
        match out.iter_mut().find(|q| q.info == p.info) {
            Some(q) => {
                for r in p.rules {
                    if !q.rules.contains(&r) {
                        q.rules.push(r);
                    }
                }
            }
            None => out.push(p),
        }
    }
    out
}

/// Simulated faults on the link between the trust manager and the
/// authority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportFault {
    Unreachable,
    /// One byte of the certificate body is altered in transit.
    Tamper,
}

/// APIL: asks the authority to attest the snapshot and verifies the
/// returned certificate before handing it on.
pub fn request_attestation(
    authority: &TrustedAuthority,
    snapshot: &InfoSnapshot,
    fault: Option<TransportFault>,
) -> Result<PropertyCertificate, TrustError> {
    if fault == Some(TransportFault::Unreachable) {
        return Err(TrustError::AuthorityUnreachable);
    }
    let mut cert = authority.property_attest(snapshot)?;
    if fault == Some(TransportFault::Tamper) {
        tamper(&mut cert);
    }
    verify_certificate(authority, snapshot, &cert)?;
    Ok(cert)
}

fn tamper(cert: &mut PropertyCertificate) {
    let v = &mut cert.static_props.vnf_hash.value;
    let last = v.pop().unwrap_or('0');
    v.push(if last == '0' { '1' } else { '0' });
}

fn verify_certificate(
    authority: &TrustedAuthority,
    snapshot: &InfoSnapshot,
    cert: &PropertyCertificate,
) -> Result<(), TrustError> {
    cert.check_signature(authority.public_key()).map_err(|e| TrustError::Verification(e.to_string()))?;
    if !cert.is_valid_at(snapshot.captured_at) {
        return Err(TrustError::Verification("outside validity window".into()));
    }
    let s = &snapshot.subject;
    if cert.vnf.id != s.vnf_id || !cert.vnf.vnf_map.iter().any(|m| m.vmid == s.vm_id) {
        return Err(TrustError::Verification("certificate names another subject".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Step {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
    S9,
    S10,
}

impl Step {
    pub const ALL: [Step; 10] =
        [Step::S1, Step::S2, Step::S3, Step::S4, Step::S5, Step::S6, Step::S7, Step::S8, Step::S9, Step::S10];
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Step {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Step::ALL.into_iter().find(|st| st.to_string() == s).ok_or_else(|| format!("unknown step `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub timestamp: u64,
    pub step: Step,
    /// `<slice>/<vnf>/<vm>`.
    pub subject: String,
    pub detail: String,
}

impl AuditEvent {
    /// `timestamp<TAB>step<TAB>subject<TAB>detail`; tabs and newlines in
    /// the detail become spaces.
    pub fn to_line(&self) -> String {
        let detail: String = self.detail.chars().map(|c| if c == '\t' || c == '\n' { ' ' } else { c }).collect();
        format!("{}\t{}\t{}\t{}", self.timestamp, self.step, self.subject, detail)
    }

    pub fn parse_line(line: &str) -> Option<AuditEvent> {
        let mut f = line.splitn(4, '\t');
        Some(AuditEvent {
            timestamp: f.next()?.parse().ok()?,
            step: f.next()?.parse().ok()?,
            subject: f.next()?.to_string(),
            detail: f.next()?.to_string(),
        })
    }
}

/// The outcome of one slice evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationReport {
    pub verdict: SliceVerdict,
    pub audit: Vec<AuditEvent>,
    /// Rendered derivation traces keyed by the verdicts' trace references.
    pub traces: BTreeMap<String, String>,
    pub certificates: Vec<PropertyCertificate>,
}

/// Requests, evaluates and aggregates; keeps an append-only audit log.
pub struct TrustManager {
    authority: Arc<TrustedAuthority>,
    policies: Arc<dyn PolicySource + Send + Sync>,
    rules: RuleBase,
    limits: Limits,
    faults: Mutex<BTreeMap<String, TransportFault>>,
    audit: Mutex<Vec<AuditEvent>>,
}

impl TrustManager {
    pub fn new(authority: Arc<TrustedAuthority>, policies: Arc<dyn PolicySource + Send + Sync>) -> Self {
        TrustManager {
            authority,
            policies,
            rules: RuleBase::new("default"),
            limits: Limits::default(),
            faults: Mutex::new(BTreeMap::new()),
            audit: Mutex::new(Vec::new()),
        }
    }

    /// Component- and slice-property rules consulted during resolution.
    pub fn with_rules(mut self, rules: RuleBase) -> Self {
        self.rules = rules;
        self
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn authority(&self) -> &Arc<TrustedAuthority> {
        &self.authority
    }

    pub fn rules(&self) -> &RuleBase {
        &self.rules
    }

    /// Applies `fault` to attestation requests for the VM or VNF `id`
    /// until cleared.
    pub fn inject_fault(&self, id: &str, fault: TransportFault) {
        self.faults.lock().expect("fault lock").insert(id.to_string(), fault);
    }

    pub fn clear_fault(&self, id: &str) {
        self.faults.lock().expect("fault lock").remove(id);
    }

    fn fault_for(&self, m: &Member) -> Option<TransportFault> {
        let f = self.faults.lock().expect("fault lock");
        f.get(&m.vm_id).or_else(|| f.get(&m.vnf_id)).copied()
    }

    /// Every event recorded so far, in order.
    pub fn audit_log(&self) -> Vec<AuditEvent> {
        self.audit.lock().expect("audit lock").clone()
    }

    pub fn audit_text(&self) -> String {
        self.audit_log().iter().map(|e| e.to_line() + "\n").collect()
    }

    /// Evaluates a deployed slice on its live state.
    pub fn evaluate_slice(&self, infra: &dyn Infrastructure, slice: &str) -> Result<EvaluationReport, TrustError> {
        self.evaluate_slice_in(infra, slice, Phase::Active)
    }

    /// Evaluates every member of `slice` in `phase`. Members are all
    /// evaluated even after one fails.
    pub fn evaluate_slice_in(
        &self,
        infra: &dyn Infrastructure,
        slice: &str,
        phase: Phase,
    ) -> Result<EvaluationReport, TrustError> {
        let members = infra.slice_members(slice)?;
        if members.members.is_empty() {
            return Err(TrustError::Enumeration { slice: slice.to_string(), detail: "no members".into() });
        }
        self.evaluate_members(infra, &members, phase)
    }

    /// Evaluates an explicit member list, e.g. a slice not yet deployed.
    pub fn evaluate_members(
        &self,
        infra: &dyn Infrastructure,
        members: &SliceMembers,
        phase: Phase,
    ) -> Result<EvaluationReport, TrustError> {
        let now = infra.now();
        let structure = structure_facts(members);
        let mut report = EvaluationReport {
            verdict: SliceVerdict {
                slice: members.slice.clone(),
                phase,
                members: Vec::new(),
                aggregate: Status::Trusted,
                evaluated_at: now,
            },
            audit: Vec::new(),
            traces: BTreeMap::new(),
            certificates: Vec::new(),
        };
        for m in &members.members {
            let v = self.evaluate_member(infra, members, m, phase, &structure, now, &mut report);
            report.verdict.members.push(v);
        }
        report.verdict.aggregate = aggregate(report.verdict.members.iter().map(|m| m.status));
        self.audit.lock().expect("audit lock").extend(report.audit.iter().cloned());
        Ok(report)
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate_member(
        &self,
        infra: &dyn Infrastructure,
        members: &SliceMembers,
        m: &Member,
        phase: Phase,
        structure: &FactBase,
        now: u64,
        report: &mut EvaluationReport,
    ) -> VnfVerdict {
        let subject = format!("{}/{}/{}", members.slice, m.vnf_id, m.vm_id);
        let mut steps = Step::ALL.into_iter();
        let mut log = |detail: String| {
            let step = steps.next().expect("ten steps per member");
            report.audit.push(AuditEvent { timestamp: now, step, subject: subject.clone(), detail });
        };
        let bare = |status, failing: Vec<String>, reason: String| VnfVerdict {
            vnf_id: m.vnf_id.clone(),
            vm_id: m.vm_id.clone(),
            status,
            failing,
            reason: Some(reason),
            certificate_id: None,
            trace_ref: None,
        };
        log(format!("{phase} evaluation of slice {} requested", members.slice));
        log(format!("member dispatched to evaluation engine (realm {})", members.realm));
        log("information requested".into());

        let early = |log: &mut dyn FnMut(String), from: usize, detail: &str, v: VnfVerdict| {
            for _ in from..10 {
                log(format!("skipped: {detail}"));
            }
            v
        };
        let snapshot = match collect_info(infra, m, phase) {
            Ok(s) => s,
            Err(e) => {
                let v = bare(Status::Uncertain, Vec::new(), format!("information unavailable: {e}"));
                return early(&mut log, 3, &e.to_string(), v);
            }
        };
        log(format!("{phase} snapshot captured at {} forwarded", snapshot.captured_at));
        log("attestation requested".into());
        let cert = match request_attestation(&self.authority, &snapshot, self.fault_for(m)) {
            Ok(c) => c,
            Err(TrustError::Verification(detail)) => {
                log("certificate issued".into());
                log(format!("certificate rejected: {detail}"));
                let v = bare(
                    Status::Untrusted,
                    vec![SIGNATURE_IS_VALID.into()],
                    format!("certificate rejected: {detail}"),
                );
                return early(&mut log, 7, "certificate rejected", v);
            }
            Err(e) => {
                let v = bare(Status::Uncertain, Vec::new(), format!("attestation failed: {e}"));
                return early(&mut log, 5, &e.to_string(), v);
            }
        };
        log(format!("certificate {} issued", cert.info.id));
        log(format!("certificate {} verified and forwarded", cert.info.id));
        log(format!("policies requested for realm {}", members.realm));
        let policies = fetch_member_policies(self.policies.as_ref(), &members.realm, &members.slice);
        let n_rules: usize = policies.iter().map(|p| p.rules.len()).sum();
        log(format!("{} policies with {n_rules} rules returned", policies.len()));

        let ctx = EvalContext {
            authority_key: self.authority.public_key(),
            references: &self.authority.references(),
            rules: &self.rules,
            limits: self.limits,
            structure: Some(structure),
        };
        let eval = evaluate_subject(&snapshot, &cert, &policies, &ctx);
        let mut v = eval.verdict;
        let trace_ref = format!("{subject}@{now}");
        report.traces.insert(trace_ref.clone(), eval.trace.to_text());
        v.trace_ref = Some(trace_ref);
        let summary = match &v.reason {
            Some(r) => format!("{} ({r})", v.status),
            None => v.status.to_string(),
        };
        log(summary);
        report.certificates.push(cert);
        v
    }
}

/// Slice membership and containment facts for the members.
pub fn structure_facts(members: &SliceMembers) -> FactBase {
    let mut fb = FactBase::new();
    for m in &members.members {
        let _ = fb.insert(Literal::has_ns(&members.slice, &m.vnf_id), Provenance::DigestReport);
        let _ = fb.insert(Literal::has_c(&m.vnf_id, &m.vm_id), Provenance::DigestReport);
    }
    fb
}
