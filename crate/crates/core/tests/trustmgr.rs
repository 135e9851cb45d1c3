mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicetrust::authority::{
    CheckerSuite, DynamicInfo, InfoSnapshot, ReferenceStore, StaticInfo, SubjectInfo, TrustedAuthority,
};
use slicetrust::credentials::{
    canonicalize_and_sign, parse_certificate, parse_policy, property_string_to_constant, samples, HashAlgorithm,
    KeyPair, PolicyInfo, PolicyRule, PolicyVerdict, PropertyCertificate, Requirements, TrustPolicy, ANY_NETWORK_SLICE,
};
use slicetrust::lopat::RuleBase;
use slicetrust::nfvsim::{EventKind, SimEvent, SliceDescriptor};
use slicetrust::resolution::Limits;
use slicetrust::trustmgr::{
    aggregate, collect_info, evaluate_subject, EvalContext, Infrastructure, Member, Phase, Scheduler, SliceVerdict,
    Status, Step, TransportFault, TrustError, TrustManager,
};

const VNF_HASH: &str = "1a0f21437fc619acc51a81d552e9af77562263f7589f72752ac492caac9f7ed5";
const VM_HASH: &str = "d41dc6385e804fd6c6fe049ecd56a3c1bafa61e669d4f3b49082ff56f8ade10d";

fn listing_subject() -> SubjectInfo {
    SubjectInfo {
        vnf_id: "022RV".into(),
        vnf_name: "router".into(),
        vnf_make: "OF".into(),
        vnf_purpose: "l2router".into(),
        vm_id: "D1X022RV".into(),
        vm_name: "sakura".into(),
        vim_location: "\"link\"".into(),
    }
}

fn listing_static(image: &str, digest: &str) -> StaticInfo {
    StaticInfo {
        image: image.into(),
        algorithm: HashAlgorithm::Sha256,
        digest: digest.into(),
        services: vec![],
        endpoints: vec![],
        build: Default::default(),
    }
}

fn listing_snapshot() -> InfoSnapshot {
    let live = DynamicInfo {
        processes: vec![],
        memory_integrity: true,
        address_randomisation: true,
        open_endpoints: vec![],
        shells: vec![],
    };
    InfoSnapshot::active(
        listing_subject(),
        listing_static("router-pkg", VNF_HASH),
        listing_static("sakura", VM_HASH),
        live,
        1_000,
    )
}

fn listing_references() -> ReferenceStore {
    let mut refs = ReferenceStore::new();
    refs.register("022RV", VNF_HASH, HashAlgorithm::Sha256, "ON").unwrap();
    refs.register("D1X022RV", VM_HASH, HashAlgorithm::Sha256, "ubuntu").unwrap();
    refs
}

fn evaluate_listing(cert: &PropertyCertificate, key: &KeyPair) -> slicetrust::trustmgr::SubjectEvaluation {
    let policy = parse_policy(samples::LISTING_POLICY.as_bytes()).unwrap();
    let refs = listing_references();
    let rules = RuleBase::new("t");
    let pk = key.public();
    let ctx = EvalContext { authority_key: &pk, references: &refs, rules: &rules, limits: Limits::default(), structure: None };
    evaluate_subject(&listing_snapshot(), cert, &[policy], &ctx)
}

#[test]
fn listing_certificate_satisfies_listing_policy() {
    let key = KeyPair::from_seed(21);
    let cert = canonicalize_and_sign(parse_certificate(samples::LISTING_CERTIFICATE.as_bytes()).unwrap(), &key).unwrap();
    let eval = evaluate_listing(&cert, &key);
    assert_eq!(eval.verdict.status, Status::Trusted, "{:?}", eval.verdict.reason);
    assert!(eval.verdict.failing.is_empty());

    // The listing's own signature is a placeholder, not a valid ECDSA signature.
    let raw = parse_certificate(samples::LISTING_CERTIFICATE.as_bytes()).unwrap();
    let eval = evaluate_listing(&raw, &key);
    assert_eq!(eval.verdict.status, Status::Untrusted);
    assert_eq!(eval.verdict.failing, vec!["digital_signature_is_valid".to_string()]);
}

#[test]
fn missing_property_names_the_failing_requirement() {
    let key = KeyPair::from_seed(21);
    let mut cert = parse_certificate(samples::LISTING_CERTIFICATE.as_bytes()).unwrap();
    cert.dynamic_props.vnf.retain(|p| !p.text.contains("No Malware"));
    let cert = canonicalize_and_sign(cert, &key).unwrap();
    let eval = evaluate_listing(&cert, &key);
    assert_eq!(eval.verdict.status, Status::Untrusted);
    assert_eq!(eval.verdict.failing, vec!["no_malware".to_string()]);
}

#[test]
fn unregistered_reference_fails_hash_requirement() {
    let key = KeyPair::from_seed(21);
    let mut cert = parse_certificate(samples::LISTING_CERTIFICATE.as_bytes()).unwrap();
    cert.static_props.vnf_hash.value = "00".repeat(32);
    let cert = canonicalize_and_sign(cert, &key).unwrap();
    let eval = evaluate_listing(&cert, &key);
    assert_eq!(eval.verdict.status, Status::Untrusted);
    assert_eq!(eval.verdict.failing, vec!["hash_is_valid".to_string()]);
}

const REQUIREMENT_POOL: &[&str] = &[
    "No Malware",
    "Memory Integrity OK",
    "No Extra Service Running",
    "Trusted Processes are Running",
    "No Memory Leakage",
    "No External Software Call",
    "Address Randomisation Enabled",
    "Hash is Valid",
    "Digital Signature is Valid",
    "Quantum Resistant Boot",
];

fn constant(text: &str) -> String {
    property_string_to_constant(text, None).unwrap().name
}

/// Constants the certificate and evaluator establish for each subject,
/// read straight off the certificate.
fn established(cert: &PropertyCertificate) -> (BTreeSet<String>, BTreeSet<String>) {
    let base = [constant("Hash is Valid"), constant("Digital Signature is Valid")];
    let mut vnf: BTreeSet<String> = base.iter().cloned().collect();
    let mut vm = vnf.clone();
    vnf.extend(cert.dynamic_props.vnf.iter().map(|p| constant(&p.text)));
    vm.extend(cert.dynamic_props.service_vm.iter().map(|p| constant(&p.text)));
    (vnf, vm)
}

fn random_requirements(rng: &mut ChaCha8Rng) -> Requirements {
    let mut r = Requirements::default();
    for p in REQUIREMENT_POOL {
        if rng.gen_bool(0.25) {
            if rng.gen_bool(0.5) { r.static_props.push(p.to_string()) } else { r.dynamic_props.push(p.to_string()) }
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// With no rules, a Trusted-labelled policy holds exactly when every
    /// required constant is established for its subject.
    #[test]
    fn verdict_is_set_inclusion_without_rules(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let key = KeyPair::from_seed(5);
        let vnf_static = StaticInfo { services: vec!["fwd".into()], ..listing_static("router-pkg", VNF_HASH) };
        let vm_static = StaticInfo { services: vec!["sshd".into()], ..listing_static("sakura", VM_HASH) };
        let pool = ["fwd", "sshd", "logicBOMB.sh", "miner"];
        let live = DynamicInfo {
            processes: pool.iter().filter(|_| rng.gen_bool(0.6)).map(|s| s.to_string()).collect(),
            memory_integrity: rng.gen_bool(0.7),
            address_randomisation: rng.gen_bool(0.7),
            open_endpoints: vec![],
            shells: vec![],
        };
        let snap = InfoSnapshot::active(listing_subject(), vnf_static, vm_static, live, 10);
        let ta = TrustedAuthority::new("TA", key.clone(), listing_references(), CheckerSuite::default());
        let cert = ta.property_attest(&snap).unwrap();

        let mut vnf = random_requirements(&mut rng);
        let vm = random_requirements(&mut rng);
        if vnf.is_empty() && vm.is_empty() {
            vnf.static_props.push("Hash is Valid".into());
        }
        let rule = PolicyRule {
            platform: ANY_NETWORK_SLICE.into(),
            resources: "Domain 1".into(),
            vnf: vnf.clone(),
            service_vm: vm.clone(),
            boot_time: PolicyVerdict::Trusted,
            run_time: PolicyVerdict::Trusted,
        };
        let policy = TrustPolicy { info: PolicyInfo { id: "p".into(), creator: "t".into(), creator_role: "admin".into() }, rules: vec![rule] };
        let refs = listing_references();
        let rules = RuleBase::new("empty");
        let pk = key.public();
        let ctx = EvalContext { authority_key: &pk, references: &refs, rules: &rules, limits: Limits::default(), structure: None };
        let got = evaluate_subject(&snap, &cert, &[policy], &ctx).verdict;

        let (have_vnf, have_vm) = established(&cert);
        let all = |req: &Requirements, have: &BTreeSet<String>| {
            req.static_props.iter().chain(&req.dynamic_props).all(|p| have.contains(&constant(p)))
        };
        let expected = if all(&vnf, &have_vnf) && all(&vm, &have_vm) { Status::Trusted } else { Status::Untrusted };
        prop_assert_eq!(got.status, expected, "{:?}", got.reason);
        if expected == Status::Untrusted {
            prop_assert_eq!(got.failing.len(), 1);
        }
    }

    #[test]
    fn aggregate_matches_fold(v in proptest::collection::vec(0u8..3, 0..40)) {
        let statuses: Vec<Status> = v.iter().map(|&n| [Status::Trusted, Status::Uncertain, Status::Untrusted][n as usize]).collect();
        let folded = statuses.iter().fold(Status::Trusted, |acc, &s| if s > acc { s } else { acc });
        prop_assert_eq!(aggregate(statuses.iter().copied()), folded);
    }
}

fn lattice_rule(statuses: &[Status]) -> Status {
    if statuses.contains(&Status::Untrusted) {
        Status::Untrusted
    } else if statuses.contains(&Status::Uncertain) {
        Status::Uncertain
    } else {
        Status::Trusted
    }
}

#[test]
fn aggregate_lattice_is_exhaustively_the_supremum() {
    let all = [Status::Trusted, Status::Uncertain, Status::Untrusted];
    let mut checked = 0;
    for n in 0u32..81 {
        let v: Vec<Status> = (0..4).map(|i| all[(n / 3u32.pow(i) % 3) as usize]).collect();
        for len in 1..=4 {
            assert_eq!(aggregate(v[..len].iter().copied()), lattice_rule(&v[..len]), "{v:?}");
        }
        checked += 1;
    }
    assert_eq!(checked, 81);
}

fn deployed_world() -> (slicetrust::nfvsim::Simulator, TrustManager) {
    let (mut sim, tm) = common::listing_world(1);
    sim.create_and_deploy_slice(SliceDescriptor::ns400(), &tm).unwrap();
    (sim, tm)
}

#[test]
fn pre_deployment_reads_no_dynamic_state() {
    let (sim, tm) = deployed_world();
    let policy = parse_policy(samples::LISTING_POLICY.as_bytes()).unwrap();
    let refs = tm.authority().references();
    let ctx = EvalContext {
        authority_key: tm.authority().public_key(),
        references: &refs,
        rules: tm.rules(),
        limits: Limits::default(),
        structure: None,
    };
    for m in &sim.slice_members("NS400").unwrap().members {
        let snap = collect_info(&sim, m, Phase::PreDeployment).unwrap();
        assert!(!snap.has_dynamic());
        let cert = tm.authority().property_attest(&snap).unwrap();
        let v = evaluate_subject(&snap, &cert, std::slice::from_ref(&policy), &ctx).verdict;
        assert_eq!(v.status, Status::Trusted);
        assert_eq!(snap.dynamic_reads(), 0);

        let active = collect_info(&sim, m, Phase::Active).unwrap();
        assert!(active.has_dynamic());
        tm.authority().property_attest(&active).unwrap();
        assert!(active.dynamic_reads() > 0);
    }
}

#[test]
fn collect_info_reflects_simulator_state() {
    let (sim, _) = deployed_world();
    for m in sim.slice_members("NS400").unwrap().members {
        let snap = collect_info(&sim, &m, Phase::Active).unwrap();
        let vm = sim.vm(&m.vm_id).unwrap();
        let live = snap.dynamic().unwrap();
        assert_eq!(live.processes, vm.live.processes);
        assert_eq!(live.shells, vm.live.shells);
        assert_eq!(live.memory_integrity, vm.live.memory_integrity);
        assert_eq!(snap.vm_static.digest, vm.digest());
        assert_eq!(snap.subject.vnf_id, vm.vnf_id);
        assert_eq!(snap.captured_at, sim.tick());
    }
    let ghost = Member { vnf_id: "vnf1".into(), vm_id: "vm3".into() };
    assert!(matches!(collect_info(&sim, &ghost, Phase::Active), Err(TrustError::UnknownSubject(_))));
}

#[test]
fn every_member_walks_ten_steps_in_order() {
    let (sim, tm) = deployed_world();
    let report = tm.evaluate_slice(&sim, "NS400").unwrap();
    assert_eq!(report.audit.len(), 20);
    for (i, chunk) in report.audit.chunks(10).enumerate() {
        let m = &report.verdict.members[i];
        let steps: Vec<Step> = chunk.iter().map(|e| e.step).collect();
        assert_eq!(steps, Step::ALL);
        assert!(chunk.iter().all(|e| e.subject == format!("NS400/{}/{}", m.vnf_id, m.vm_id)));
    }
    for e in &report.audit {
        assert_eq!(slicetrust::trustmgr::AuditEvent::parse_line(&e.to_line()).as_ref(), Some(e));
    }
    assert!(tm.audit_log().ends_with(&report.audit));

    // Failed attestations still produce ten steps per member.
    tm.inject_fault("vm1", TransportFault::Unreachable);
    tm.inject_fault("vm3", TransportFault::Tamper);
    let report = tm.evaluate_slice(&sim, "NS400").unwrap();
    assert_eq!(report.audit.len(), 20);
    for chunk in report.audit.chunks(10) {
        assert_eq!(chunk.iter().map(|e| e.step).collect::<Vec<_>>(), Step::ALL);
    }
}

#[test]
fn transport_faults_map_to_verdicts() {
    let (sim, tm) = deployed_world();
    tm.inject_fault("vm3", TransportFault::Tamper);
    let v = tm.evaluate_slice(&sim, "NS400").unwrap().verdict;
    let m = v.members.iter().find(|m| m.vm_id == "vm3").unwrap();
    assert_eq!(m.status, Status::Untrusted);
    assert_eq!(m.failing, vec!["digital_signature_is_valid".to_string()]);
    assert_eq!(v.aggregate, Status::Untrusted);

    tm.inject_fault("vm3", TransportFault::Unreachable);
    let v = tm.evaluate_slice(&sim, "NS400").unwrap().verdict;
    assert_eq!(v.members.iter().find(|m| m.vm_id == "vm3").unwrap().status, Status::Uncertain);
    assert_eq!(v.aggregate, Status::Uncertain);

    tm.clear_fault("vm3");
    assert_eq!(tm.evaluate_slice(&sim, "NS400").unwrap().verdict.aggregate, Status::Trusted);
}

#[test]
fn evaluation_is_deterministic() {
    let run = || {
        let (mut sim, tm) = deployed_world();
        sim.inject_event(SimEvent::new(3, EventKind::TriggerLogicBomb, "vm3")).unwrap();
        sim.advance(4, &tm).unwrap();
        let r = tm.evaluate_slice(&sim, "NS400").unwrap();
        (r.verdict, r.audit, r.traces)
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    let back = SliceVerdict::from_json(&a.0.to_json()).unwrap();
    assert_eq!(back, a.0);
    assert_eq!(SliceVerdict::parse_text(&a.0.to_text()).unwrap(), a.0);
}

#[test]
fn no_policy_is_uncertain() {
    let (sim, tm) = deployed_world();
    let bare = TrustManager::new(tm.authority().clone(), Arc::new(Vec::<TrustPolicy>::new()));
    let v = bare.evaluate_slice(&sim, "NS400").unwrap().verdict;
    assert_eq!(v.aggregate, Status::Uncertain);
    assert!(v.members.iter().all(|m| m.reason.as_deref() == Some("no policy")));
}

#[test]
fn adding_requirements_never_improves_the_verdict() {
    let (mut sim, tm) = deployed_world();
    sim.inject_event(SimEvent::new(2, EventKind::TriggerLogicBomb, "vm3")).unwrap();
    sim.set_auto_mitigate(false);
    sim.advance(3, &tm).unwrap();
    let base = parse_policy(samples::LISTING_POLICY.as_bytes()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let mut grown = base.clone();
        let extra = random_requirements(&mut rng);
        grown.rules[0].vnf.static_props.extend(extra.static_props);
        grown.rules[0].service_vm.dynamic_props.extend(extra.dynamic_props);
        let weak = TrustManager::new(tm.authority().clone(), Arc::new(vec![base.clone()]));
        let strong = TrustManager::new(tm.authority().clone(), Arc::new(vec![grown]));
        let a = weak.evaluate_slice(&sim, "NS400").unwrap().verdict;
        let b = strong.evaluate_slice(&sim, "NS400").unwrap().verdict;
        for (x, y) in a.members.iter().zip(&b.members) {
            assert!(y.status >= x.status, "{x:?} -> {y:?}");
        }
    }
}

#[test]
fn scheduler_counts_and_rejects_duplicates() {
    let (mut sim, tm) = deployed_world();
    let interval = sim.interval();
    sim.advance(interval * 7 + 2, &tm).unwrap();
    let sub = sim.scheduler().get("NS400").unwrap();
    assert_eq!(sub.evaluations, 7);
    assert_eq!(sub.next_due, interval * 8);

    let mut s = Scheduler::new();
    s.schedule("a", 3, 0, Status::Trusted).unwrap();
    assert!(matches!(s.schedule("a", 3, 0, Status::Trusted), Err(TrustError::DuplicateSubscription(_))));
    assert!(matches!(s.schedule("b", 0, 0, Status::Trusted), Err(TrustError::InvalidInterval)));
    assert_eq!(s.due(2), Vec::<String>::new());
    assert_eq!(s.due(3), vec!["a".to_string()]);
    s.cancel("a").unwrap();
    assert!(s.due(100).is_empty());
    assert!(matches!(s.cancel("a"), Err(TrustError::UnknownSubscription(_))));
}

#[test]
fn unknown_slice_is_reported() {
    let (sim, tm) = deployed_world();
    assert!(matches!(tm.evaluate_slice(&sim, "NS999"), Err(TrustError::UnknownSlice(_))));
}
