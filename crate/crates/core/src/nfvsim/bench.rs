//! On-boarding delay benchmark.
//!
//! The delay of one VM is the CPU time its on-boarding takes on the
//! current thread. The base path measures the VM image and compares it with
//! the source digest, as any VIM does. The trust path additionally has the
//! authority attest `properties` synthetic properties and the evaluation
//! engine check each of them against a policy. Aggregated delay is the sum
//! over VMs. CPU time stands in for the hardware CPU-usage figures of a
//! real deployment; absolute values depend on the machine.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::authority::{
    CheckerSuite, DynamicInfo, InfoSnapshot, Level, ReferenceStore, StaticInfo, SubjectInfo, TrustedAuthority,
};
use crate::credentials::{
    HashAlgorithm, KeyPair, PolicyInfo, PolicyRule, PolicyVerdict, Requirements, TrustPolicy,
};
use crate::lopat::RuleBase;
use crate::resolution::Limits;
use crate::trustmgr::{evaluate_subject, EvalContext, Status};

pub const CSV_HEADER: &str = "vms,properties,base_opd,trust_opd,overhead_pct";

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "thread CPU clock unavailable");
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Relative cost of the trust path: `(with_trust - base) / base`.
pub fn overhead_ratio(base: f64, with_trust: f64) -> f64 {
    (with_trust - base) / base
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub vm_counts: Vec<usize>,
    pub property_counts: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    /// Bytes of VM image measured per on-boarding.
    pub image_bytes: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            vm_counts: vec![10, 20, 30, 40],
            property_counts: vec![100, 200, 300, 400],
            repetitions: 10,
            seed: 7,
            image_bytes: 64 * 1024,
        }
    }
}

/// Aggregated delays of one repetition, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub base_opd: f64,
    pub trust_opd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub vms: usize,
    pub properties: usize,
    pub samples: Vec<RunSample>,
    pub base_opd: f64,
    pub trust_opd: f64,
    pub overhead_ratio: f64,
}

impl BenchReport {
    fn from_samples(vms: usize, properties: usize, samples: Vec<RunSample>) -> Self {
        let n = samples.len() as f64;
        let base = samples.iter().map(|s| s.base_opd).sum::<f64>() / n;
        let trust = samples.iter().map(|s| s.trust_opd).sum::<f64>() / n;
        BenchReport { vms, properties, samples, base_opd: base, trust_opd: trust, overhead_ratio: overhead_ratio(base, trust) }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.2}",
            self.vms,
            self.properties,
            self.base_opd,
            self.trust_opd,
            self.overhead_ratio * 100.0
        )
    }

    pub fn to_csv(reports: &[BenchReport]) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

struct Fixture {
    ta: TrustedAuthority,
    policy: Vec<TrustPolicy>,
    rules: RuleBase,
    image: Vec<u8>,
    vm_static: StaticInfo,
    vnf_static: StaticInfo,
}

fn fixture(properties: usize, config: &BenchConfig) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ properties as u64);
    let image: Vec<u8> = (0..config.image_bytes).map(|_| rng.gen()).collect();
    let package = b"bench-vnf-package".to_vec();
    let stat = |name: &str, bytes: &[u8]| StaticInfo {
        image: name.to_string(),
        algorithm: HashAlgorithm::Sha256,
        digest: HashAlgorithm::Sha256.digest(bytes),
        services: vec!["benchd".into()],
        endpoints: vec![],
        build: BTreeMap::new(),
    };
    let vm_static = stat("bench-image", &image);
    let vnf_static = stat("bench-pkg", &package);
    let mut refs = ReferenceStore::new();
    refs.register("bench-image", &vm_static.digest, HashAlgorithm::Sha256, "bench").expect("digest");
    refs.register("bench-pkg", &vnf_static.digest, HashAlgorithm::Sha256, "bench").expect("digest");
    let suite = CheckerSuite::empty().with_synthetic(Level::ServiceVm, properties as u32);
    let ta = TrustedAuthority::new("TA", KeyPair::from_seed(config.seed), refs, suite);
    let rule = PolicyRule {
        platform: crate::credentials::ANY_NETWORK_SLICE.into(),
        resources: "bench".into(),
        vnf: Requirements { static_props: vec!["Hash is Valid".into()], dynamic_props: vec![] },
        service_vm: Requirements {
            static_props: vec!["Hash is Valid".into()],
            dynamic_props: (0..properties).map(|n| format!("Synthetic Property {n}")).collect(),
        },
        boot_time: PolicyVerdict::Trusted,
        run_time: PolicyVerdict::Trusted,
    };
    let policy = vec![TrustPolicy {
        info: PolicyInfo { id: "bench".into(), creator: "bench".into(), creator_role: "admin".into() },
        rules: vec![rule],
    }];
    Fixture { ta, policy, rules: RuleBase::new("bench"), image, vm_static, vnf_static }
}

fn subject(i: usize) -> SubjectInfo {
    SubjectInfo {
        vnf_id: format!("vnf{i}"),
        vnf_name: "bench".into(),
        vnf_make: "bench".into(),
        vnf_purpose: "bench".into(),
        vm_id: format!("vm{i}"),
        vm_name: "bench".into(),
        vim_location: "bench".into(),
    }
}

/// What every VIM does: measure the image and compare with its source.
fn base_onboarding(f: &Fixture) -> bool {
    HashAlgorithm::Sha256.digest(&f.image) == f.vm_static.digest
}

/// Base on-boarding plus binary attestation, and property attestation and
/// evaluation when properties are configured.
fn trust_onboarding(f: &Fixture, i: usize, properties: usize, tick: u64) -> bool {
    let mut ok = base_onboarding(f);
    ok &= f.ta.binary_attest(&f.image, "bench-image", HashAlgorithm::Sha256).is_ok_and(|a| a.matched);
    if properties == 0 {
        return ok;
    }
    let live = DynamicInfo {
        processes: vec!["benchd".into()],
        memory_integrity: true,
        address_randomisation: true,
        open_endpoints: vec![],
        shells: vec![],
    };
    let snap = InfoSnapshot::active(subject(i), f.vnf_static.clone(), f.vm_static.clone(), live, tick);
    let Ok(cert) = f.ta.property_attest(&snap) else { return false };
    let refs = f.ta.references();
    let ctx = EvalContext {
        authority_key: f.ta.public_key(),
        references: &refs,
        rules: &f.rules,
        limits: Limits::default(),
        structure: None,
    };
    ok && evaluate_subject(&snap, &cert, &f.policy, &ctx).verdict.status == Status::Trusted
}

fn timed(mut work: impl FnMut() -> bool) -> f64 {
    let start = thread_cpu_seconds();
    let ok = work();
    let elapsed = thread_cpu_seconds() - start;
    assert!(ok, "benchmark on-boarding failed");
    elapsed
}

/// Measures every (VM count, property count) cell `repetitions` times.
pub fn run_opd_benchmark(config: &BenchConfig) -> Vec<BenchReport> {
    let reps = config.repetitions.max(1);
    let mut reports = Vec::new();
    for &vms in &config.vm_counts {
        for &props in &config.property_counts {
            let f = fixture(props, config);
            let samples = (0..reps)
                .map(|rep| {
                    let mut s = RunSample { base_opd: 0.0, trust_opd: 0.0 };
                    for i in 0..vms {
                        s.base_opd += timed(|| base_onboarding(&f));
                        s.trust_opd += timed(|| trust_onboarding(&f, i, props, rep as u64));
                    }
                    s
                })
                .collect();
            reports.push(BenchReport::from_samples(vms, props, samples));
        }
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_on_reported_pair() {
        let r = overhead_ratio(453.64, 478.56);
        assert!((r * 100.0 - 5.49).abs() < 0.01, "{r}");
    }

    #[test]
    fn small_run_means_recompute() {
        let cfg = BenchConfig { vm_counts: vec![2], property_counts: vec![0, 3], repetitions: 3, ..Default::default() };
        let reports = run_opd_benchmark(&cfg);
        assert_eq!(reports.len(), 2);
        for r in &reports {
            assert_eq!(r.samples.len(), 3);
            let mean = r.samples.iter().map(|s| s.trust_opd).sum::<f64>() / 3.0;
            assert!((mean - r.trust_opd).abs() < 1e-12);
        }
        let csv = BenchReport::to_csv(&reports);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
    }
}
