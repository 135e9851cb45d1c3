//! Random generators shared by the property and acceptance tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use slicetrust::lopat::{Literal, Predicate, Rule, RuleBase, Sort, Term};
use slicetrust::resolution::FactBase;

pub struct Instance {
    pub facts: FactBase,
    pub rules: RuleBase,
    pub components: Vec<String>,
    pub slices: Vec<String>,
    pub properties: Vec<String>,
}

impl Instance {
    /// Every ground SatC and SatNS literal over the instance constants.
    pub fn goals(&self) -> Vec<Literal> {
        let mut out = Vec::new();
        for c in &self.components {
            for p in &self.properties {
                out.push(Literal::sat_c(c, p));
            }
        }
        for s in &self.slices {
            for p in &self.properties {
                out.push(Literal::sat_ns(s, p));
            }
        }
        out
    }
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a str {
    items.choose(rng).expect("non-empty")
}

fn term<R: Rng>(rng: &mut R, consts: &[String], vars: &[&str], sort: Sort, var_bias: f64) -> Term {
    if !vars.is_empty() && rng.gen_bool(var_bias) {
        Term::variable(*vars.choose(rng).unwrap(), sort)
    } else {
        Term::constant(pick(rng, consts), sort)
    }
}

fn lit(p: Predicate, args: Vec<Term>) -> Literal {
    Literal::new(p, args).expect("generator respects signatures")
}

/// A random CP or NSP rule over the given constants. The result may fail
/// validation; callers filter through `RuleBase::add`.
pub fn random_derivation_rule<R: Rng>(rng: &mut R, comps: &[String], slices: &[String], props: &[String]) -> Rule {
    let cv = ["X", "Y"];
    let pv = ["P"];
    let sv = ["S"];
    let bias = 0.4;
    if rng.gen_bool(0.55) {
        let head = lit(
            Predicate::SatC,
            vec![term(rng, comps, &cv, Sort::Component, bias), term(rng, props, &pv, Sort::Property, 0.15)],
        );
        let n = rng.gen_range(1..=3);
        let mut body = Vec::new();
        for i in 0..n {
            if i == 0 || rng.gen_bool(0.6) {
                body.push(lit(
                    Predicate::SatC,
                    vec![term(rng, comps, &cv, Sort::Component, bias), term(rng, props, &pv, Sort::Property, 0.15)],
                ));
            } else {
                body.push(lit(
                    Predicate::HasC,
                    vec![term(rng, comps, &cv, Sort::Component, bias), term(rng, comps, &cv, Sort::Component, bias)],
                ));
            }
        }
        body.shuffle(rng);
        Rule::new(head, body)
    } else {
        let head = lit(
            Predicate::SatNS,
            vec![term(rng, slices, &sv, Sort::NetworkSlice, bias), term(rng, props, &pv, Sort::Property, 0.15)],
        );
        let mut body = Vec::new();
        if rng.gen_bool(0.6) {
            body.push(lit(
                Predicate::SatC,
                vec![term(rng, comps, &cv, Sort::Component, bias), term(rng, props, &pv, Sort::Property, 0.15)],
            ));
            body.push(lit(
                Predicate::HasNS,
                vec![term(rng, slices, &sv, Sort::NetworkSlice, bias), term(rng, comps, &cv, Sort::Component, bias)],
            ));
        }
        if body.is_empty() || rng.gen_bool(0.3) {
            body.push(lit(
                Predicate::SatNS,
                vec![term(rng, slices, &sv, Sort::NetworkSlice, bias), term(rng, props, &pv, Sort::Property, 0.15)],
            ));
        }
        body.shuffle(rng);
        Rule::new(head, body)
    }
}

pub fn random_fact<R: Rng>(rng: &mut R, comps: &[String], slices: &[String], props: &[String]) -> Literal {
    match rng.gen_range(0..10) {
        0..=3 => Literal::sat_c(pick(rng, comps), pick(rng, props)),
        4..=5 => Literal::has_c(pick(rng, comps), pick(rng, comps)),
        6..=7 => Literal::has_ns(pick(rng, slices), pick(rng, comps)),
        8 => Literal::sat_ns(pick(rng, slices), pick(rng, props)),
        _ => Literal::ground(
            Predicate::PreReq,
            &[pick(rng, comps), pick(rng, props), pick(rng, comps), pick(rng, props)],
        )
        .unwrap(),
    }
}

/// ≤8 components, ≤4 slices, ≤12 validated rules, ≤20 facts.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let components: Vec<String> = (0..rng.gen_range(1..=8)).map(|i| format!("c{i}")).collect();
    let slices: Vec<String> = (0..rng.gen_range(1..=4)).map(|i| format!("s{i}")).collect();
    let properties: Vec<String> = (0..rng.gen_range(1..=4)).map(|i| format!("p{i}")).collect();
    let mut facts = FactBase::new();
    for _ in 0..rng.gen_range(0..=20) {
        facts
            .insert(random_fact(rng, &components, &slices, &properties), slicetrust::resolution::Provenance::Asserted)
            .unwrap();
    }
    let mut rules = RuleBase::new("random");
    let target = rng.gen_range(0..=12);
    let mut attempts = 0;
    while rules.len() < target && attempts < 200 {
        attempts += 1;
        let _ = rules.add(random_derivation_rule(rng, &components, &slices, &properties));
    }
    Instance { facts, rules, components, slices, properties }
}

const ODD_NAMES: [&str; 6] = ["D1X022RV", "it's", "back\\slash", "two words", "x-y", "new\nline"];

fn any_constant<R: Rng>(rng: &mut R, sort: Sort) -> Term {
    if sort == Sort::Permission {
        return Term::constant(*["allow", "deny"].choose(rng).unwrap(), sort);
    }
    let name = match rng.gen_range(0..6) {
        0 => ODD_NAMES.choose(rng).unwrap().to_string(),
        1 => format!("hash_{:040x}", rng.gen::<u128>()),
        2 => format!("{}", rng.gen_range(0..1000)),
        _ => format!("k{}_{}", rng.gen_range(0..50), ["a", "b", "true", "false"].choose(rng).unwrap()),
    };
    Term::constant(name, sort)
}

/// Any well-formed rule: facts over every predicate, and CP/NSP rules with
/// odd constant names.
pub fn random_well_formed_rule<R: Rng>(rng: &mut R) -> Rule {
    loop {
        let rule = if rng.gen_bool(0.35) {
            let p = *Predicate::ALL.choose(rng).unwrap();
            let args = p.signature().iter().map(|s| any_constant(rng, *s)).collect();
            Rule::fact(lit(p, args))
        } else {
            let comps: Vec<String> = (0..4).map(|_| any_constant(rng, Sort::Component).name).collect();
            let slices: Vec<String> = (0..3).map(|_| any_constant(rng, Sort::NetworkSlice).name).collect();
            let props: Vec<String> = (0..4).map(|_| any_constant(rng, Sort::Property).name).collect();
            random_derivation_rule(rng, &comps, &slices, &props)
        };
        if slicetrust::lopat::validate_rule(&rule).is_ok() {
            return rule;
        }
    }
}

/// One random single-character mutation of `doc` outside its `digitalSign`
/// element. Replacing whitespace with other whitespace leaves the document
/// content unchanged, so such pairs are not drawn.
pub fn mutate_outside_signature<R: Rng>(rng: &mut R, doc: &str) -> (usize, String) {
    const POOL: &[u8] = b" \t\nabcxyzABCXYZ0123456789<>/=\"'&;.-_#!?";
    let chars: Vec<char> = doc.chars().collect();
    let open = doc.find("<digitalSign>").expect("signature element");
    let close = doc.find("</digitalSign>").expect("signature element") + "</digitalSign>".len();
    // Character offsets of the signature element (documents are ASCII here).
    let (lo, hi) = (doc[..open].chars().count(), doc[..close].chars().count());
    loop {
        let i = rng.gen_range(0..chars.len());
        if (lo..hi).contains(&i) {
            continue;
        }
        let r = POOL[rng.gen_range(0..POOL.len())] as char;
        if r == chars[i] || (r.is_whitespace() && chars[i].is_whitespace()) {
            continue;
        }
        let mut m = chars.clone();
        m[i] = r;
        return (i, m.into_iter().collect());
    }
}

const REALMS: &[&str] = &["Domain 1", "Domain 2", "Edge"];
const PROPERTY_POOL: &[&str] =
    &["Hash is Valid", "No Malware", "Memory Integrity ok", "No Extra Service Running", "Trusted Processes"];

fn random_requirements<R: Rng>(rng: &mut R) -> slicetrust::credentials::Requirements {
    let pick = |rng: &mut R| -> Vec<String> {
        PROPERTY_POOL.iter().filter(|_| rng.gen_bool(0.3)).map(|s| s.to_string()).collect()
    };
    slicetrust::credentials::Requirements { static_props: pick(rng), dynamic_props: pick(rng) }
}

/// A valid policy with one to three rules over a small realm pool.
pub fn random_policy<R: Rng>(rng: &mut R, id: &str) -> slicetrust::credentials::TrustPolicy {
    use slicetrust::credentials::{PolicyInfo, PolicyRule, PolicyVerdict, TrustPolicy, ANY_NETWORK_SLICE};
    let verdict = |rng: &mut R| if rng.gen_bool(0.8) { PolicyVerdict::Trusted } else { PolicyVerdict::Untrusted };
    let rules = (0..rng.gen_range(1..=3))
        .map(|_| {
            let mut vnf = random_requirements(rng);
            let service_vm = random_requirements(rng);
            if vnf.is_empty() && service_vm.is_empty() {
                vnf.static_props.push("Hash is Valid".into());
            }
            PolicyRule {
                platform: if rng.gen_bool(0.7) { ANY_NETWORK_SLICE.into() } else { format!("NS{}", rng.gen_range(1..4) * 100) },
                resources: REALMS[rng.gen_range(0..REALMS.len())].into(),
                vnf,
                service_vm,
                boot_time: verdict(rng),
                run_time: verdict(rng),
            }
        })
        .collect();
    TrustPolicy { info: PolicyInfo { id: id.into(), creator: "gen".into(), creator_role: "admin".into() }, rules }
}

/// A simulator with the standard catalog, an authority that knows the
/// catalog, and a trust manager holding the listing policy.
pub fn listing_world(seed: u64) -> (slicetrust::nfvsim::Simulator, slicetrust::trustmgr::TrustManager) {
    use std::sync::Arc;
    use slicetrust::authority::{CheckerSuite, ReferenceStore, TrustedAuthority};
    use slicetrust::credentials::{parse_policy, samples, KeyPair};
    let sim = slicetrust::nfvsim::Simulator::new(seed);
    let ta = TrustedAuthority::new("TA", KeyPair::from_seed(seed), ReferenceStore::new(), CheckerSuite::default());
    sim.register_catalog(&ta).unwrap();
    let policy = parse_policy(samples::LISTING_POLICY.as_bytes()).unwrap();
    let tm = slicetrust::trustmgr::TrustManager::new(Arc::new(ta), Arc::new(vec![policy]));
    (sim, tm)
}
