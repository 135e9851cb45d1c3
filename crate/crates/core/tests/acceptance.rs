//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p slicetrust --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicetrust::credentials::{
    canonicalize_and_sign, parse_certificate, parse_policy, samples, verify_signature, KeyPair,
};
use slicetrust::lopat::{parse_rule, parse_rules, validate_rule, Literal, RuleBase, RuleKind};
use slicetrust::nfvsim::{overhead_ratio, run_opd_benchmark, BenchConfig, EventKind, LogKind, SimEvent, SliceDescriptor, VmStatus};
use slicetrust::policyrepo::{Actor, PolicyRepository, RepoError};
use slicetrust::resolution::{cp_resolve, forward_close, FactBase, FailureReason, Limits, Provenance, Resolver};
use slicetrust::trustmgr::{aggregate, Status};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Backward resolution agrees with the forward fixpoint.
fn resolution_agreement() -> Outcome {
    let start = Instant::now();
    let (mut instances, mut goals) = (0, 0);
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng);
        let closed = forward_close(&inst.facts, &inst.rules).map_err(|e| e.to_string())?;
        let mut r = Resolver::new(&inst.facts, &inst.rules, Limits::default());
        for g in inst.goals() {
            let got = r.prove_goal(&g).satisfied;
            check(got == closed.contains(&g), format!("instance {seed}: {g} resolved {got}"))?;
            goals += 1;
        }
        instances += 1;
    }
    let t = start.elapsed();
    check(t < Duration::from_secs(60), format!("took {t:?}"))?;
    Ok(format!("{instances} instances, {goals} goals agree in {:.2}s", t.as_secs_f64()))
}

const H: &str = "hash_e2c182bbb85c2e3a5fcae1936c5900cf91dd7743";

/// The six rule shapes used to introduce the language, with their
/// expected kinds.
fn example_rules() -> Vec<(String, RuleKind)> {
    vec![
        ("SatC(c1,p1) <- SatC(c1,p2).".into(), RuleKind::Cp),
        (format!("SatC(c1,trusted_true) <- SatC(c1,{H}) & SatC(c1,malware_false)."), RuleKind::Cp),
        ("SatC(c1,p1) <- SatC(c2,p2) & HasC(c1,c2).".into(), RuleKind::Cp),
        ("SatNS(ns1,p1) <- SatNS(ns1,p2).".into(), RuleKind::Nsp),
        ("SatNS(ns1,p1) <- SatC(c2,p2) & HasNS(ns1,c2).".into(), RuleKind::Nsp),
        ("SatNS(ns1,p1) <- SatC(c2,p2) & HasNS(ns1,c2) & SatNS(ns1,p3).".into(), RuleKind::Nsp),
    ]
}

fn example_corpus() -> Outcome {
    let mut rb = RuleBase::new("examples");
    for (text, kind) in example_rules() {
        let r = parse_rule(&text).map_err(|e| format!("{text}: {e}"))?;
        validate_rule(&r).map_err(|e| format!("{text}: {e}"))?;
        check(r.kind == kind, format!("{text}: kind {:?}", r.kind))?;
        rb.add(r).map_err(|e| format!("{text}: {e}"))?;
    }
    let body = [Literal::sat_c("c1", H), Literal::sat_c("c1", "malware_false")];
    let goal = Literal::sat_c("c1", "trusted_true");
    let facts = |skip: Option<usize>| {
        let mut fb = FactBase::new();
        for (i, l) in body.iter().enumerate() {
            if Some(i) != skip {
                fb.insert(l.clone(), Provenance::Asserted).unwrap();
            }
        }
        fb
    };
    let full = cp_resolve(&goal, &facts(None), &rb, Limits::default());
    check(full.satisfied, "example (b) does not derive")?;
    check(forward_close(&facts(None), &rb).unwrap().contains(&goal), "fixpoint lacks the head")?;
    for (i, missing) in body.iter().enumerate() {
        let r = cp_resolve(&goal, &facts(Some(i)), &rb, Limits::default());
        check(!r.satisfied, format!("still derives without {missing}"))?;
    }
    Ok("6 rules valid; example (b) derives and needs both body facts".into())
}

fn listing_fidelity() -> Outcome {
    let cert = parse_certificate(samples::LISTING_CERTIFICATE.as_bytes()).map_err(|e| e.to_string())?;
    check(cert.vnf.id == "022RV" && cert.vnf.name == "router", "vnf identity")?;
    check(cert.vnf.vnf_map.len() == 1 && cert.vnf.vnf_map[0].vmid == "D1X022RV", "vnf map")?;
    check(
        cert.static_props.vnf_hash.value == "1a0f21437fc619acc51a81d552e9af77562263f7589f72752ac492caac9f7ed5",
        "vnf hash",
    )?;
    check(cert.dynamic_props.vnf.len() == 3 && cert.dynamic_props.service_vm.len() == 3, "property counts")?;
    let policy = parse_policy(samples::LISTING_POLICY.as_bytes()).map_err(|e| e.to_string())?;
    check(policy.info.id == "01" && policy.rules.len() == 1, "policy shape")?;
    check(policy.rules[0].resources == "Domain 1", "policy realm")?;

    let key = KeyPair::from_seed(21);
    let signed = canonicalize_and_sign(cert, &key).map_err(|e| e.to_string())?;
    let doc = signed.to_xml();
    let reparsed = parse_certificate(doc.as_bytes()).map_err(|e| e.to_string())?;
    check(reparsed.to_xml() == doc, "certificate canonical form is not a fixpoint")?;
    let pdoc = policy.to_xml();
    check(parse_policy(pdoc.as_bytes()).map_err(|e| e.to_string())?.to_xml() == pdoc, "policy canonical form")?;
    check(verify_signature(&reparsed, &key.public()), "re-signed listing does not verify")?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let (mut tried, mut accepted) = (0, 0);
    for _ in 0..200 {
        let (_, m) = common::mutate_outside_signature(&mut rng, &doc);
        tried += 1;
        if parse_certificate(m.as_bytes()).is_ok_and(|c| verify_signature(&c, &key.public())) {
            accepted += 1;
        }
    }
    check(accepted == 0, format!("{accepted}/{tried} mutations accepted"))?;
    Ok(format!("listings parse exactly; canonical round trip holds; 0/{tried} mutations accepted"))
}

fn end_to_end() -> Outcome {
    let run = || -> Result<(String, Vec<String>), String> {
        let (mut sim, tm) = common::listing_world(1);
        let v = sim.create_and_deploy_slice(SliceDescriptor::ns400(), &tm).map_err(|e| e.to_string())?;
        check(v.aggregate == Status::Trusted && v.members.len() == 2, "clean deployment not trusted")?;
        let inject_at = 10;
        sim.inject_event(SimEvent::new(inject_at, EventKind::TriggerLogicBomb, "vm3")).map_err(|e| e.to_string())?;
        sim.advance(inject_at + sim.interval() + 5, &tm).map_err(|e| e.to_string())?;
        let flagged = sim
            .log()
            .iter()
            .find(|e| e.kind == LogKind::Evaluation && e.detail.contains("untrusted"))
            .ok_or("never flagged")?;
        check(flagged.tick <= inject_at + sim.interval(), format!("flagged at {}", flagged.tick))?;
        check(flagged.detail.contains("vnf3/vm3 untrusted") && !flagged.detail.contains("vm1 "), flagged.detail.clone())?;
        check(sim.vm("vm3").map(|v| v.status) == Some(VmStatus::Replaced), "vm3 not isolated and replaced")?;
        let rec = sim.mitigations().first().ok_or("no mitigation")?;
        check(rec.isolated_vm == "vm3" && rec.replacement_vm.is_some(), "wrong mitigation")?;
        check(sim.last_verdict("NS400").map(|v| v.aggregate) == Some(Status::Trusted), "not trusted after mitigation")?;
        Ok((sim.to_json(), sim.log().iter().map(|e| e.to_string()).collect()))
    };
    let start = Instant::now();
    let a = run()?;
    let b = run()?;
    let t = start.elapsed();
    check(a == b, "two runs differ")?;
    check(t < Duration::from_secs(5), format!("took {t:?}"))?;
    Ok(format!("untrusted within one interval, vm3 replaced, trusted again; deterministic; {:.2}s for two runs", t.as_secs_f64()))
}

fn cycles_terminate() -> Outcome {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let result = catch_unwind(|| {
            let mut cases = vec![
                "SatC(c1,p1) <- SatC(c1,p1).".to_string(),
                "SatNS(ns1,p1) <- SatNS(ns1,p1).".to_string(),
                "SatC(c1,a) <- SatC(c1,b).\nSatC(c1,b) <- SatC(c1,a).".to_string(),
                "SatC(X,p) <- SatC(X,p) & HasC(X,Y).\nHasC(c1,c2).".to_string(),
                "SatNS(ns1,p) <- SatC(c1,q) & HasNS(ns1,c1).\nSatC(c1,q) <- SatC(c2,q) & HasC(c1,c2).\nSatC(c2,q) <- SatC(c1,q) & HasC(c2,c1).".to_string(),
            ];
            let chain: Vec<String> = (0..30).map(|i| format!("SatC(c1,p{i}) <- SatC(c1,p{}).", (i + 1) % 30)).collect();
            cases.push(chain.join("\n"));
            let mut n = 0;
            for text in &cases {
                let rules = parse_rules(text).map_err(|e| format!("{text}: {e}"))?;
                let mut rb = RuleBase::new("cyclic");
                let mut facts = FactBase::new();
                for r in rules {
                    if r.body.is_empty() && r.head.is_ground() {
                        facts.insert(r.head.clone(), Provenance::Asserted).unwrap();
                    } else {
                        rb.add(r).map_err(|e| e.to_string())?;
                    }
                }
                for head in rb.rules().iter().map(|r| r.head.clone()).filter(|h| h.is_ground()).chain([Literal::sat_c("c1", "p")]) {
                    let r = cp_resolve(&head, &facts, &rb, Limits::default());
                    if r.satisfied {
                        return Err(format!("{head} satisfied under\n{text}"));
                    }
                    if !matches!(r.reason, Some(FailureReason::Cycle | FailureReason::Budget | FailureReason::NoDerivation)) {
                        return Err(format!("{head}: {:?}", r.reason));
                    }
                    n += 1;
                }
            }
            Ok(format!("{} cyclic rule sets, {n} goals unsatisfied", cases.len()))
        });
        let _ = tx.send(result.unwrap_or_else(|_| Err("panicked".into())));
    });
    let start = Instant::now();
    match rx.recv_timeout(Duration::from_secs(10)) {
        Ok(r) => r.map(|s| format!("{s} in {:.3}s", start.elapsed().as_secs_f64())),
        Err(_) => Err("watchdog: no answer within 10s".into()),
    }
}

fn lattice() -> Outcome {
    let all = [Status::Trusted, Status::Uncertain, Status::Untrusted];
    let rule = |v: &[Status]| {
        if v.contains(&Status::Untrusted) {
            Status::Untrusted
        } else if v.contains(&Status::Uncertain) {
            Status::Uncertain
        } else {
            Status::Trusted
        }
    };
    let mut exact = 0;
    for n in 0u32..81 {
        let v: Vec<Status> = (0..4).map(|i| all[(n / 3u32.pow(i) % 3) as usize]).collect();
        for len in 1..=4 {
            check(aggregate(v[..len].iter().copied()) == rule(&v[..len]), format!("{:?}", &v[..len]))?;
        }
        exact += 1;
    }
    Ok(format!("{exact}/81 four-member vectors (and their prefixes) exact"))
}

fn benchmark() -> Outcome {
    let cfg = BenchConfig::default();
    let reports = run_opd_benchmark(&cfg);
    for &vms in &cfg.vm_counts {
        let row: Vec<f64> = reports.iter().filter(|r| r.vms == vms).map(|r| r.trust_opd).collect();
        check(row.len() == 4, "missing cells")?;
        check(row.windows(2).all(|w| w[1] >= w[0]), format!("trust OPD decreases at {vms} VMs: {row:?}"))?;
    }
    let pct = overhead_ratio(453.64, 478.56) * 100.0;
    let shown = format!("{pct:.2}%");
    check((pct - 5.49).abs() <= 0.01 && shown == "5.49%", shown.clone())?;
    Ok(format!(
        "{} reps per cell; trust OPD non-decreasing in properties at every VM count; overhead_ratio(453.64, 478.56) = {shown}",
        cfg.repetitions
    ))
}

fn policy_durability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let admin = Actor::new("bob", "admin");
    let mut repo = PolicyRepository::open(dir.path()).map_err(|e| e.to_string())?;
    let mut applied = 0;
    for _ in 0..200 {
        let id = format!("p{}", rng.gen_range(0..10));
        let r = match rng.gen_range(0..3) {
            0 => repo.add_policy(common::random_policy(&mut rng, &id), &admin).map(|_| ()),
            1 => repo.update_policy(&id, common::random_policy(&mut rng, &id), &admin).map(|_| ()),
            _ => repo.delete_policy(&id, &admin),
        };
        match r {
            Ok(()) => applied += 1,
            Err(RepoError::Duplicate(_) | RepoError::UnknownPolicy(_)) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    let reloaded = PolicyRepository::open(dir.path()).map_err(|e| e.to_string())?;
    check(reloaded == repo, "reloaded state differs")?;

    let bytes = |p: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let mut v: Vec<_> = walk(p).into_iter().map(|f| (f.display().to_string(), std::fs::read(&f).unwrap())).collect();
        v.sort();
        v
    };
    let before = bytes(dir.path());
    let eve = Actor::new("eve", "operator");
    let mut rejected = 0;
    for id in ["p0", "p1", "p5", "new"] {
        let p = common::random_policy(&mut rng, id);
        rejected += repo.add_policy(p.clone(), &eve).is_err() as usize;
        rejected += repo.update_policy(id, p, &eve).is_err() as usize;
        rejected += repo.delete_policy(id, &eve).is_err() as usize;
    }
    check(rejected == 12, "a non-admin mutation succeeded")?;
    check(bytes(dir.path()) == before, "store bytes changed")?;
    Ok(format!("200 operations ({applied} applied) reload identically; {rejected} non-admin mutations left the store unchanged"))
}

fn walk(p: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(p).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("resolution agrees with forward closure", resolution_agreement),
        ("example rule corpus", example_corpus),
        ("listing fidelity", listing_fidelity),
        ("logic bomb end to end", end_to_end),
        ("cyclic rules terminate", cycles_terminate),
        ("aggregation lattice", lattice),
        ("on-boarding delay benchmark", benchmark),
        ("policy durability", policy_durability),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
