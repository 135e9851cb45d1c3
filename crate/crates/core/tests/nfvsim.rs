mod common;

use slicetrust::nfvsim::{
    parse_schedule, run_opd_benchmark, schedule_to_text, BenchConfig, EventKind, LogKind, Mutation, SimError,
    SimEvent, Simulator, SliceDescriptor, VmStatus,
};
use slicetrust::trustmgr::{Alert, Status};

fn deployed(seed: u64) -> (Simulator, slicetrust::trustmgr::TrustManager) {
    let (mut sim, tm) = common::listing_world(seed);
    let v = sim.create_and_deploy_slice(SliceDescriptor::ns400(), &tm).unwrap();
    assert_eq!(v.aggregate, Status::Trusted);
    (sim, tm)
}

fn first_untrusted_tick(sim: &Simulator) -> Option<u64> {
    sim.log().iter().find(|e| e.kind == LogKind::Evaluation && e.detail.contains("untrusted")).map(|e| e.tick)
}

#[test]
fn logic_bomb_timeline() {
    let (mut sim, tm) = deployed(1);
    assert_eq!(sim.interval(), 5);
    sim.inject_event(SimEvent::new(10, EventKind::TriggerLogicBomb, "vm3")).unwrap();
    sim.advance(20, &tm).unwrap();
    assert_eq!(first_untrusted_tick(&sim), Some(15));
    let eval = sim.log().iter().find(|e| e.tick == 15 && e.kind == LogKind::Evaluation).unwrap();
    assert!(eval.detail.contains("vnf3/vm3 untrusted"), "{}", eval.detail);
    assert!(!eval.detail.contains("vm1 "), "{}", eval.detail);

    let recs = sim.mitigations();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!((r.isolated_vm.as_str(), r.replacement_vm.as_deref()), ("vm3", Some("vm3_r1")));
    assert_eq!((r.isolated_at, r.reevaluated_at, r.outcome), (15, Some(15), Status::Trusted));
    assert_eq!(sim.vm("vm3").unwrap().status, VmStatus::Replaced);
    assert_eq!(sim.vm("vm3_r1").unwrap().status, VmStatus::Deployed);
    assert_eq!(sim.last_verdict("NS400").unwrap().aggregate, Status::Trusted);
    assert_eq!(sim.slice("NS400").unwrap().descriptor.version, 2);
    assert_eq!(sim.slice("NS400").unwrap().descriptor.vm_ids(), vec!["vm1", "vm3_r1"]);
}

#[test]
fn two_runs_are_identical() {
    let run = || {
        let (mut sim, tm) = deployed(3);
        for e in parse_schedule("10 trigger_logic_bomb vm3\n12 tamper_image vm1\n").unwrap() {
            sim.inject_event(e).unwrap();
        }
        sim.advance(25, &tm).unwrap();
        (sim.to_json(), tm.audit_text())
    };
    assert_eq!(run(), run());
}

#[test]
fn mitigation_keeps_membership_size() {
    let (mut sim, tm) = deployed(1);
    let before = sim.deployed_placements().len();
    sim.inject_event(SimEvent::new(3, EventKind::TriggerLogicBomb, "vm1")).unwrap();
    sim.inject_event(SimEvent::new(3, EventKind::TriggerLogicBomb, "vm3")).unwrap();
    sim.advance(5, &tm).unwrap();
    assert_eq!(sim.mitigations().len(), 2);
    assert_eq!(sim.deployed_placements().len(), before);
    let vnfs: Vec<_> = sim.deployed_placements().into_iter().map(|(v, _)| v).collect();
    assert_eq!(vnfs, vec!["vnf1", "vnf3"]);
}

#[test]
fn tampered_catalog_image_fails_the_gate() {
    let (mut sim, tm) = common::listing_world(1);
    sim.catalog_mut().get_mut("ubuntu-22.04").unwrap().content.push_str("backdoor\n");
    let err = sim.create_and_deploy_slice(SliceDescriptor::ns400(), &tm).unwrap_err();
    match err {
        SimError::GateFailure { failing, .. } => assert!(failing.iter().any(|f| f.contains("digest mismatch")), "{failing:?}"),
        e => panic!("{e}"),
    }
    assert!(sim.slice("NS400").is_none());
    assert_eq!(sim.vms().count(), 0);
    assert!(sim.deployed_placements().is_empty());
    assert!(sim.scheduler().get("NS400").is_none());
}

#[test]
fn tampered_image_at_runtime_cannot_be_replaced_from_a_tampered_catalog() {
    let (mut sim, tm) = deployed(1);
    sim.catalog_mut().get_mut("ubuntu-22.04").unwrap().content.push_str("x\n");
    sim.inject_event(SimEvent::new(2, EventKind::TamperImage, "vm3")).unwrap();
    sim.advance(5, &tm).unwrap();
    assert_eq!(sim.vm("vm3").unwrap().status, VmStatus::Isolated);
    assert!(sim.log().iter().any(|e| e.kind == LogKind::MitigationFailed));
    assert_eq!(sim.last_verdict("NS400").unwrap().aggregate, Status::Untrusted);
}

#[test]
fn isolated_vms_receive_no_events_and_are_not_mitigated_twice() {
    let (mut sim, tm) = deployed(1);
    sim.set_auto_mitigate(false);
    sim.inject_event(SimEvent::new(1, EventKind::TriggerLogicBomb, "vm3")).unwrap();
    sim.advance(5, &tm).unwrap();
    let alert = Alert {
        slice: "NS400".into(),
        tick: 5,
        from: Status::Trusted,
        to: Status::Untrusted,
        flagged: vec![("vnf3".into(), "vm3".into())],
    };
    let recs = sim.mitigate(&alert, &tm).unwrap();
    assert_eq!(recs.len(), 1);
    let snapshot = sim.to_json();
    assert!(sim.mitigate(&alert, &tm).unwrap().is_empty());
    assert_eq!(sim.to_json(), snapshot);

    let live = sim.vm("vm3").unwrap().live.clone();
    assert!(matches!(
        sim.inject_event(SimEvent::new(9, EventKind::TriggerLogicBomb, "vm3")),
        Err(SimError::TargetIsolated(_))
    ));
    sim.advance(5, &tm).unwrap();
    assert_eq!(sim.vm("vm3").unwrap().live, live);
}

#[test]
fn disjoint_events_commute() {
    let a = SimEvent::custom(2, "vm1", vec![Mutation::AddProcess("x".into()), Mutation::MemoryIntegrity(false)]);
    let b = SimEvent::custom(2, "vm3", vec![Mutation::OpenEndpoint("eth9:1".into()), Mutation::AddShell("sh".into())]);
    let run = |first: &SimEvent, second: &SimEvent| {
        let (mut sim, tm) = deployed(1);
        sim.set_auto_mitigate(false);
        sim.inject_event(first.clone()).unwrap();
        sim.inject_event(second.clone()).unwrap();
        sim.advance(2, &tm).unwrap();
        sim.vms().cloned().collect::<Vec<_>>()
    };
    assert_eq!(run(&a, &b), run(&b, &a));
}

#[test]
fn state_round_trips_through_json() {
    let start = || {
        let (mut sim, tm) = deployed(4);
        sim.inject_event(SimEvent::new(10, EventKind::TriggerLogicBomb, "vm3")).unwrap();
        sim.advance(7, &tm).unwrap();
        (sim, tm)
    };
    let (mut sim, tm) = start();
    let (other, tm2) = start();
    let mut resumed = Simulator::from_json(&other.to_json()).unwrap();
    assert_eq!(resumed, other);
    sim.advance(10, &tm).unwrap();
    resumed.advance(10, &tm2).unwrap();
    assert_eq!(resumed, sim);
}

#[test]
fn advancing_without_events_only_evaluates() {
    let (mut sim, tm) = deployed(1);
    let log = sim.advance(12, &tm).unwrap();
    assert!(log.iter().all(|e| e.kind == LogKind::Evaluation), "{log:?}");
    assert_eq!(log.len(), 2);
    assert!(sim.mitigations().is_empty());
    assert!(matches!(sim.advance(0, &tm), Err(SimError::InvalidTicks)));
}

#[test]
fn events_must_be_in_the_future() {
    let (mut sim, tm) = deployed(1);
    sim.advance(3, &tm).unwrap();
    assert!(matches!(sim.inject_event(SimEvent::new(3, EventKind::TriggerLogicBomb, "vm1")), Err(SimError::PastEvent { .. })));
    assert!(matches!(sim.inject_event(SimEvent::new(9, EventKind::TriggerLogicBomb, "vm9")), Err(SimError::UnknownVm(_))));
}

#[test]
fn schedule_text_round_trips() {
    let events = vec![
        SimEvent::new(10, EventKind::TriggerLogicBomb, "vm3"),
        SimEvent::new(12, EventKind::TamperImage, "vm1"),
        SimEvent::custom(14, "vm1", vec![Mutation::AddressRandomisation(false), Mutation::RemoveProcess("sshd".into())]),
    ];
    assert_eq!(parse_schedule(&schedule_to_text(&events)).unwrap(), events);
    let d = SliceDescriptor::ns400();
    assert_eq!(SliceDescriptor::parse(&d.to_text()).unwrap(), d);
    assert_eq!(SliceDescriptor::parse(include_str!("../data/ns400.slice")).unwrap(), d);
}

#[test]
fn benchmark_with_no_properties_has_small_overhead_and_grows_with_properties() {
    let cfg = BenchConfig { vm_counts: vec![2], property_counts: vec![0, 50], repetitions: 2, ..Default::default() };
    let reports = run_opd_benchmark(&cfg);
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.base_opd > 0.0 && r.trust_opd > 0.0));
    assert!(reports[1].trust_opd > reports[0].trust_opd);
}
