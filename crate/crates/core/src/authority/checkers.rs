//! Property checkers run by the authority over snapshot fields.
//!
//! A checker affirms one property string. The suite is configured by a
//! manifest with one checker per line:
//!
//! ```text
//! vnf no_malware
//! service_vm trusted_processes
//! synthetic service_vm 100      # 100 generated checkers
//! ```

use std::collections::BTreeSet;
use std::fmt;

use sha2::{Digest as _, Sha256};

use super::snapshot::{DynamicInfo, StaticInfo};
use super::AuthorityError;
use crate::credentials::PropertyEntry;

/// Process names a malware scan flags outright.
pub const MALWARE_SIGNATURES: &[&str] = &["logicBOMB.sh"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Vnf,
    ServiceVm,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Vnf => "vnf",
            Level::ServiceVm => "service_vm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckerKind {
    NoMalware,
    MemoryIntegrity,
    NoExtraService,
    TrustedProcesses,
    NoMemoryLeakage,
    NoExternalCall,
    AddressRandomisation,
    /// Generated load for benchmarks; affirms `Synthetic Property <n>`.
    Synthetic(u32),
}

impl CheckerKind {
    const NAMED: [CheckerKind; 7] = [
        CheckerKind::NoMalware,
        CheckerKind::MemoryIntegrity,
        CheckerKind::NoExtraService,
        CheckerKind::TrustedProcesses,
        CheckerKind::NoMemoryLeakage,
        CheckerKind::NoExternalCall,
        CheckerKind::AddressRandomisation,
    ];

    pub fn name(self) -> String {
        match self {
            CheckerKind::NoMalware => "no_malware".into(),
            CheckerKind::MemoryIntegrity => "memory_integrity".into(),
            CheckerKind::NoExtraService => "no_extra_service".into(),
            CheckerKind::TrustedProcesses => "trusted_processes".into(),
            CheckerKind::NoMemoryLeakage => "no_memory_leakage".into(),
            CheckerKind::NoExternalCall => "no_external_call".into(),
            CheckerKind::AddressRandomisation => "address_randomisation".into(),
            CheckerKind::Synthetic(n) => format!("synthetic_{n}"),
        }
    }

    /// The property string written into certificates.
    pub fn property(self) -> String {
        match self {
            CheckerKind::NoMalware => "No Malware".into(),
            CheckerKind::MemoryIntegrity => "Memory Integrity ok".into(),
            CheckerKind::NoExtraService => "No Extra Service Running".into(),
            CheckerKind::TrustedProcesses => "Trusted Processes are Running".into(),
            CheckerKind::NoMemoryLeakage => "No Memory Leakage".into(),
            CheckerKind::NoExternalCall => "No External Software Call".into(),
            CheckerKind::AddressRandomisation => "Address Randomisation Enabled".into(),
            CheckerKind::Synthetic(n) => format!("Synthetic Property {n}"),
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::NAMED.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Checker {
    pub level: Level,
    pub kind: CheckerKind,
}

fn expected(vnf: &StaticInfo, vm: &StaticInfo) -> (BTreeSet<String>, BTreeSet<String>) {
    let services = vnf.services.iter().chain(&vm.services).cloned().collect();
    let endpoints = vnf.endpoints.iter().chain(&vm.endpoints).cloned().collect();
    (services, endpoints)
}

impl Checker {
    /// The affirmed property, or `None` if the check fails.
    pub fn run(&self, vnf: &StaticInfo, vm: &StaticInfo, live: &DynamicInfo) -> Option<PropertyEntry> {
        let (services, endpoints) = expected(vnf, vm);
        let holds = match self.kind {
            CheckerKind::NoMalware => live.processes.iter().chain(&live.shells).all(|p| {
                !MALWARE_SIGNATURES.contains(&p.as_str()) && (services.contains(p) || !p.ends_with(".sh"))
            }),
            CheckerKind::MemoryIntegrity | CheckerKind::NoMemoryLeakage => live.memory_integrity,
            CheckerKind::NoExtraService => live.processes.iter().chain(&live.shells).all(|p| services.contains(p)),
            CheckerKind::TrustedProcesses => {
                let running: BTreeSet<&String> = live.processes.iter().chain(&live.shells).collect();
                let ok = services.iter().all(|s| running.contains(s));
                return ok.then(|| PropertyEntry::with_value(self.kind.property(), services.len().to_string()));
            }
            CheckerKind::NoExternalCall => live.open_endpoints.iter().all(|e| endpoints.contains(e)),
            CheckerKind::AddressRandomisation => live.address_randomisation,
            CheckerKind::Synthetic(n) => synthetic_check(n, vnf, vm, live),
        };
        holds.then(|| PropertyEntry::new(self.kind.property()))
    }
}

/// Deterministic busy work standing in for an introspection probe: hashes
/// the live state with the checker index. Always affirms.
fn synthetic_check(n: u32, vnf: &StaticInfo, vm: &StaticInfo, live: &DynamicInfo) -> bool {
    let mut h = Sha256::new();
    h.update(n.to_le_bytes());
    for _ in 0..SYNTHETIC_ROUNDS {
        h.update(vnf.digest.as_bytes());
        h.update(vm.digest.as_bytes());
        for p in &live.processes {
            h.update(p.as_bytes());
        }
    }
    let d = h.finalize();
    d.len() == 32
}

const SYNTHETIC_ROUNDS: usize = 64;

/// The checkers for VNF-level and service-VM-level properties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckerSuite {
    checkers: Vec<Checker>,
}

impl Default for CheckerSuite {
    fn default() -> Self {
        use CheckerKind::*;
        let vnf = [NoMalware, MemoryIntegrity, NoExtraService].map(|kind| Checker { level: Level::Vnf, kind });
        let vm = [TrustedProcesses, NoMemoryLeakage, NoExternalCall, AddressRandomisation]
            .map(|kind| Checker { level: Level::ServiceVm, kind });
        CheckerSuite { checkers: vnf.into_iter().chain(vm).collect() }
    }
}

impl CheckerSuite {
    pub fn empty() -> Self {
        CheckerSuite { checkers: Vec::new() }
    }

    pub fn checkers(&self) -> &[Checker] {
        &self.checkers
    }

    pub fn push(&mut self, checker: Checker) {
        if !self.checkers.contains(&checker) {
            self.checkers.push(checker);
        }
    }

    /// Adds `count` synthetic checkers at `level`, numbered after any
    /// existing ones.
    pub fn with_synthetic(mut self, level: Level, count: u32) -> Self {
        let start = self.checkers.iter().filter(|c| matches!(c.kind, CheckerKind::Synthetic(_))).count() as u32;
        for n in start..start + count {
            self.push(Checker { level, kind: CheckerKind::Synthetic(n) });
        }
        self
    }

    pub fn parse_manifest(text: &str) -> Result<Self, AuthorityError> {
        let mut suite = CheckerSuite::empty();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || AuthorityError::Manifest { line: i + 1, detail: line.to_string() };
            let words: Vec<&str> = line.split_whitespace().collect();
            let level = |w: &str| match w {
                "vnf" => Some(Level::Vnf),
                "service_vm" => Some(Level::ServiceVm),
                _ => None,
            };
            match words.as_slice() {
                ["synthetic", lvl, count] => {
                    let lvl = level(lvl).ok_or_else(bad)?;
                    let count: u32 = count.parse().map_err(|_| bad())?;
                    suite = suite.with_synthetic(lvl, count);
                }
                [lvl, name] => {
                    let lvl = level(lvl).ok_or_else(bad)?;
                    let kind = CheckerKind::from_name(name).ok_or_else(bad)?;
                    suite.push(Checker { level: lvl, kind });
                }
                _ => return Err(bad()),
            }
        }
        Ok(suite)
    }

    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let mut synthetic = [0u32; 2];
        for c in &self.checkers {
            match c.kind {
                CheckerKind::Synthetic(_) => synthetic[(c.level == Level::ServiceVm) as usize] += 1,
                k => out.push_str(&format!("{} {}\n", c.level, k.name())),
            }
        }
        for (i, level) in [Level::Vnf, Level::ServiceVm].into_iter().enumerate() {
            if synthetic[i] > 0 {
                out.push_str(&format!("synthetic {level} {}\n", synthetic[i]));
            }
        }
        out
    }

    /// Properties affirmed at each level, in suite order.
    pub fn run(&self, vnf: &StaticInfo, vm: &StaticInfo, live: &DynamicInfo) -> (Vec<PropertyEntry>, Vec<PropertyEntry>) {
        let mut at_vnf = Vec::new();
        let mut at_vm = Vec::new();
        for c in &self.checkers {
            if let Some(p) = c.run(vnf, vm, live) {
                match c.level {
                    Level::Vnf => at_vnf.push(p),
                    Level::ServiceVm => at_vm.push(p),
                }
            }
        }
        (at_vnf, at_vm)
    }
}
