//! A discrete-event NFV infrastructure: slices of VNFs on VMs, a
//! deployment gate, compromise events, isolate-and-replace mitigation and
//! the on-boarding delay benchmark.
//!
//! Within one tick, due evaluations run before due events, so an event at
//! tick `t` is first seen by an evaluation at a later tick.

mod bench;
mod catalog;
mod descriptor;
mod event;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use bench::{overhead_ratio, run_opd_benchmark, thread_cpu_seconds, BenchConfig, BenchReport, RunSample, CSV_HEADER};
pub use catalog::{Image, ImageCatalog};
pub use descriptor::{SliceDescriptor, VmSpec, VnfDescriptor};
pub use event::{parse_schedule, schedule_to_text, EventKind, Mutation, SimEvent, BOMB_SHELL, LOGIC_BOMB};

use crate::authority::{DynamicInfo, InfoSnapshot, Phase, SubjectInfo, TrustedAuthority};
use crate::credentials::HashAlgorithm;
use crate::trustmgr::{
    Alert, Infrastructure, Member, Scheduler, SliceMembers, SliceVerdict, Status, TrustError, TrustManager,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("descriptor: {0}")]
    Descriptor(String),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("unknown slice `{0}`")]
    UnknownSlice(String),
    #[error("unknown VM `{0}`")]
    UnknownVm(String),
    #[error("slice `{0}` already exists")]
    DuplicateSlice(String),
    #[error("id `{0}` is already in use")]
    IdInUse(String),
    #[error("unknown image `{0}`")]
    UnknownImage(String),
    #[error("slice `{0}` is already deployed")]
    AlreadyDeployed(String),
    #[error("gate failed for `{slice}`: {}", failing.join("; "))]
    GateFailure { slice: String, failing: Vec<String> },
    #[error("no clean image `{image}` to replace `{vm}`")]
    NoCleanImage { vm: String, image: String },
    #[error("VM `{0}` is isolated; event dropped")]
    TargetIsolated(String),
    #[error("event at tick {at} is not after the current tick {now}")]
    PastEvent { at: u64, now: u64 },
    #[error("tick count must be positive")]
    InvalidTicks,
    #[error("simulator state: {0}")]
    State(String),
    #[error(transparent)]
    Trust(#[from] TrustError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VmStatus {
    Staged,
    Deployed,
    Isolated,
    Replaced,
}

impl fmt::Display for VmStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VmStatus::Staged => "staged",
            VmStatus::Deployed => "deployed",
            VmStatus::Isolated => "isolated",
            VmStatus::Replaced => "replaced",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveState {
    pub processes: Vec<String>,
    pub shells: Vec<String>,
    pub address_randomisation: bool,
    pub memory_integrity: bool,
    pub open_endpoints: Vec<String>,
}

impl LiveState {
    fn apply(&mut self, m: &Mutation) {
        fn add(list: &mut Vec<String>, x: &str) {
            if !list.iter().any(|p| p == x) {
                list.push(x.to_string());
            }
        }
        match m {
            Mutation::AddProcess(p) => add(&mut self.processes, p),
            Mutation::RemoveProcess(p) => self.processes.retain(|x| x != p),
            Mutation::AddShell(p) => add(&mut self.shells, p),
            Mutation::RemoveShell(p) => self.shells.retain(|x| x != p),
            Mutation::OpenEndpoint(e) => add(&mut self.open_endpoints, e),
            Mutation::AddressRandomisation(on) => self.address_randomisation = *on,
            Mutation::MemoryIntegrity(ok) => self.memory_integrity = *ok,
            Mutation::AppendArtifact(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimVm {
    pub id: String,
    pub vnf_id: String,
    pub slice: String,
    pub image: String,
    /// The booted artifact; equals the image content unless tampered.
    pub artifact: String,
    /// Processes the image is expected to run.
    pub manifest: Vec<String>,
    pub live: LiveState,
    pub status: VmStatus,
}

impl SimVm {
    pub fn digest(&self) -> String {
        HashAlgorithm::Sha256.digest(self.artifact.as_bytes())
    }

    /// Live state of a freshly booted VM: the manifest, nothing else.
    fn boot_state(image: &Image, package: &Image) -> LiveState {
        LiveState {
            processes: package.services.iter().chain(&image.services).cloned().collect(),
            shells: Vec::new(),
            address_randomisation: true,
            memory_integrity: true,
            open_endpoints: package.endpoints.iter().chain(&image.endpoints).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimVnf {
    pub id: String,
    pub slice: String,
    pub role: String,
    pub package: String,
    pub package_artifact: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceState {
    pub descriptor: SliceDescriptor,
    pub deployed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Created,
    Deployed,
    GateFailed,
    Event,
    Dropped,
    Evaluation,
    Alert,
    Isolated,
    Replaced,
    MitigationFailed,
    Reevaluated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tick: u64,
    pub kind: LogKind,
    pub detail: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = serde_json::to_value(self.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        write!(f, "{}\t{}\t{}", self.tick, kind, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationRecord {
    pub slice: String,
    pub vnf_id: String,
    pub isolated_vm: String,
    pub replacement_vm: Option<String>,
    pub isolated_at: u64,
    pub replaced_at: Option<u64>,
    pub reevaluated_at: Option<u64>,
    /// Slice status after re-evaluation; untrusted if no replacement.
    pub outcome: Status,
    pub descriptor_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Pending {
    seq: u64,
    event: SimEvent,
}

/// The simulated infrastructure. Its whole state is serialisable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Simulator {
    seed: u64,
    tick: u64,
    interval: u64,
    auto_mitigate: bool,
    catalog: ImageCatalog,
    slices: BTreeMap<String, SliceState>,
    vnfs: BTreeMap<String, SimVnf>,
    vms: BTreeMap<String, SimVm>,
    pending: Vec<Pending>,
    next_seq: u64,
    scheduler: Scheduler,
    replacements: BTreeMap<String, u32>,
    log: Vec<LogEntry>,
    mitigations: Vec<MitigationRecord>,
    verdicts: BTreeMap<String, SliceVerdict>,
}

/// Default ticks between periodic evaluations.
pub const DEFAULT_INTERVAL: u64 = 5;

impl Simulator {
    /// An empty infrastructure with the standard catalog drawn from `seed`.
    pub fn new(seed: u64) -> Self {
        Simulator::with_catalog(seed, ImageCatalog::standard(seed))
    }

    pub fn with_catalog(seed: u64, catalog: ImageCatalog) -> Self {
        Simulator {
            seed,
            tick: 0,
            interval: DEFAULT_INTERVAL,
            auto_mitigate: true,
            catalog,
            slices: BTreeMap::new(),
            vnfs: BTreeMap::new(),
            vms: BTreeMap::new(),
            pending: Vec::new(),
            next_seq: 0,
            scheduler: Scheduler::new(),
            replacements: BTreeMap::new(),
            log: Vec::new(),
            mitigations: Vec::new(),
            verdicts: BTreeMap::new(),
        }
    }

    pub fn set_interval(&mut self, interval: u64) -> Result<(), SimError> {
        if interval == 0 {
            return Err(TrustError::InvalidInterval.into());
        }
        self.interval = interval;
        Ok(())
    }

    pub fn set_auto_mitigate(&mut self, on: bool) {
        self.auto_mitigate = on;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }

    pub fn catalog(&self) -> &ImageCatalog {
        &self.catalog
    }

    pub fn catalog_mut(&mut self) -> &mut ImageCatalog {
        &mut self.catalog
    }

    pub fn slices(&self) -> impl Iterator<Item = &SliceState> {
        self.slices.values()
    }

    pub fn slice(&self, id: &str) -> Option<&SliceState> {
        self.slices.get(id)
    }

    pub fn vm(&self, id: &str) -> Option<&SimVm> {
        self.vms.get(id)
    }

    pub fn vms(&self) -> impl Iterator<Item = &SimVm> {
        self.vms.values()
    }

    pub fn vnfs(&self) -> impl Iterator<Item = &SimVnf> {
        self.vnfs.values()
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn scheduler_mut(&mut self) -> &mut Scheduler {
        &mut self.scheduler
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn mitigations(&self) -> &[MitigationRecord] {
        &self.mitigations
    }

    pub fn last_verdict(&self, slice: &str) -> Option<&SliceVerdict> {
        self.verdicts.get(slice)
    }

    pub fn pending_events(&self) -> impl Iterator<Item = &SimEvent> {
        self.pending.iter().map(|p| &p.event)
    }

    /// Registers every catalog image's digest with the authority under the
    /// image name.
    pub fn register_catalog(&self, authority: &TrustedAuthority) -> Result<(), SimError> {
        for img in self.catalog.images() {
            authority
                .register_reference(&img.name, &img.digest(), HashAlgorithm::Sha256, &img.make)
                .map_err(TrustError::from)?;
        }
        Ok(())
    }

    fn push_log(&mut self, out: &mut Vec<LogEntry>, kind: LogKind, detail: String) {
        let e = LogEntry { tick: self.tick, kind, detail };
        self.log.push(e.clone());
        out.push(e);
    }

    fn image(&self, name: &str) -> Result<&Image, SimError> {
        self.catalog.get(name).ok_or_else(|| SimError::UnknownImage(name.to_string()))
    }

    /// Stages the slice's VNFs and VMs without deploying them.
    pub fn create_slice(&mut self, descriptor: SliceDescriptor) -> Result<(), SimError> {
        descriptor.validate()?;
        if self.slices.contains_key(&descriptor.id) {
            return Err(SimError::DuplicateSlice(descriptor.id));
        }
        for (vnf, vm) in descriptor.placements() {
            for id in [&vnf.id, &vm.id] {
                if self.vnfs.contains_key(id) || self.vms.contains_key(id) {
                    return Err(SimError::IdInUse(id.clone()));
                }
            }
            self.image(&vnf.package)?;
            self.image(&vm.image)?;
        }
        for v in &descriptor.vnfs {
            let package = self.image(&v.package)?.clone();
            self.vnfs.insert(
                v.id.clone(),
                SimVnf {
                    id: v.id.clone(),
                    slice: descriptor.id.clone(),
                    role: v.role.clone(),
                    package: v.package.clone(),
                    package_artifact: package.content.clone(),
                },
            );
            for m in &v.vms {
                let vm = self.stage_vm(&m.id, &v.id, &descriptor.id, &m.image, &package)?;
                self.vms.insert(m.id.clone(), vm);
            }
        }
        let id = descriptor.id.clone();
        self.slices.insert(id.clone(), SliceState { descriptor, deployed: false });
        self.push_log(&mut Vec::new(), LogKind::Created, id);
        Ok(())
    }

    fn stage_vm(&self, id: &str, vnf: &str, slice: &str, image: &str, package: &Image) -> Result<SimVm, SimError> {
        let img = self.image(image)?;
        Ok(SimVm {
            id: id.to_string(),
            vnf_id: vnf.to_string(),
            slice: slice.to_string(),
            image: image.to_string(),
            artifact: img.content.clone(),
            manifest: package.services.iter().chain(&img.services).cloned().collect(),
            live: SimVm::boot_state(img, package),
            status: VmStatus::Staged,
        })
    }

    fn remove_slice(&mut self, id: &str) {
        if let Some(s) = self.slices.remove(id) {
            for (vnf, vm) in s.descriptor.placements() {
                self.vnfs.remove(&vnf.id);
                self.vms.remove(&vm.id);
            }
        }
    }

    /// Measures each artifact against its image reference and evaluates
    /// every member in the pre-deployment phase. Returns the failures.
    fn gate(&self, members: &SliceMembers, tm: &TrustManager) -> Result<(Vec<String>, SliceVerdict), SimError> {
        let ta = tm.authority();
        let mut failing = Vec::new();
        for m in &members.members {
            let vm = self.vms.get(&m.vm_id).ok_or_else(|| SimError::UnknownVm(m.vm_id.clone()))?;
            let vnf = &self.vnfs[&m.vnf_id];
            for (what, artifact, image) in
                [(&m.vnf_id, &vnf.package_artifact, &vnf.package), (&m.vm_id, &vm.artifact, &vm.image)]
            {
                match ta.binary_attest(artifact.as_bytes(), image, HashAlgorithm::Sha256) {
                    Ok(a) if a.matched => {}
                    Ok(_) => failing.push(format!("{what}: digest mismatch for {image}")),
                    Err(e) => failing.push(format!("{what}: {e}")),
                }
            }
        }
        let report = tm.evaluate_members(self, members, Phase::PreDeployment)?;
        for v in &report.verdict.members {
            if v.status != Status::Trusted {
                let why = v.reason.clone().unwrap_or_else(|| v.failing.join(","));
                failing.push(format!("{}/{}: {} ({why})", v.vnf_id, v.vm_id, v.status));
            }
        }
        Ok((failing, report.verdict))
    }

    /// Runs the pre-deployment gate over a created slice and deploys it if
    /// every member passes; nothing is deployed otherwise. On success the
    /// slice is scheduled for periodic evaluation.
    pub fn deploy_slice(&mut self, id: &str, tm: &TrustManager) -> Result<SliceVerdict, SimError> {
        let state = self.slices.get(id).ok_or_else(|| SimError::UnknownSlice(id.to_string()))?;
        if state.deployed {
            return Err(SimError::AlreadyDeployed(id.to_string()));
        }
        let members = self.slice_members(id)?;
        let (failing, verdict) = self.gate(&members, tm)?;
        if !failing.is_empty() {
            self.push_log(&mut Vec::new(), LogKind::GateFailed, format!("{id}: {}", failing.join("; ")));
            return Err(SimError::GateFailure { slice: id.to_string(), failing });
        }
        for m in &members.members {
            self.vms.get_mut(&m.vm_id).expect("member VM").status = VmStatus::Deployed;
        }
        self.slices.get_mut(id).expect("slice").deployed = true;
        self.scheduler.schedule(id, self.interval, self.tick, Status::Trusted)?;
        self.verdicts.insert(id.to_string(), verdict.clone());
        self.push_log(&mut Vec::new(), LogKind::Deployed, id.to_string());
        Ok(verdict)
    }

    /// Creates and deploys in one step. A failed gate leaves no trace of
    /// the slice in the infrastructure.
    pub fn create_and_deploy_slice(
        &mut self,
        descriptor: SliceDescriptor,
        tm: &TrustManager,
    ) -> Result<SliceVerdict, SimError> {
        let id = descriptor.id.clone();
        self.create_slice(descriptor)?;
        match self.deploy_slice(&id, tm) {
            Ok(v) => Ok(v),
            Err(e) => {
                self.remove_slice(&id);
                Err(e)
            }
        }
    }

    /// Queues an event. Events aimed at isolated or replaced VMs are
    /// dropped and logged.
    pub fn inject_event(&mut self, event: SimEvent) -> Result<(), SimError> {
        let vm = self.vms.get(&event.target).ok_or_else(|| SimError::UnknownVm(event.target.clone()))?;
        if matches!(vm.status, VmStatus::Isolated | VmStatus::Replaced) {
            self.push_log(&mut Vec::new(), LogKind::Dropped, event.to_line());
            return Err(SimError::TargetIsolated(event.target));
        }
        if event.at <= self.tick {
            return Err(SimError::PastEvent { at: event.at, now: self.tick });
        }
        self.next_seq += 1;
        self.pending.push(Pending { seq: self.next_seq, event });
        Ok(())
    }

    fn apply_event(&mut self, event: &SimEvent, out: &mut Vec<LogEntry>) {
        let status = self.vms.get(&event.target).map(|v| v.status);
        if status != Some(VmStatus::Deployed) {
            self.push_log(out, LogKind::Dropped, event.to_line());
            return;
        }
        let vm = self.vms.get_mut(&event.target).expect("target");
        for m in &event.payload {
            if let Mutation::AppendArtifact(t) = m {
                vm.artifact.push_str(t);
                vm.artifact.push('\n');
            }
            vm.live.apply(m);
        }
        self.push_log(out, LogKind::Event, event.to_line());
    }

    /// Runs `ticks` ticks. Each tick runs due evaluations (and any
    /// mitigation their alerts trigger), then due events in injection
    /// order.
    pub fn advance(&mut self, ticks: u64, tm: &TrustManager) -> Result<Vec<LogEntry>, SimError> {
        if ticks == 0 {
            return Err(SimError::InvalidTicks);
        }
        let mut out = Vec::new();
        for _ in 0..ticks {
            self.tick += 1;
            for slice in self.scheduler.due(self.tick) {
                self.periodic_evaluation(&slice, tm, &mut out)?;
            }
            let now = self.tick;
            let (mut due, rest): (Vec<Pending>, Vec<Pending>) =
                std::mem::take(&mut self.pending).into_iter().partition(|p| p.event.at <= now);
            self.pending = rest;
            due.sort_by_key(|p| (p.event.at, p.seq));
            for p in due {
                self.apply_event(&p.event, &mut out);
            }
        }
        Ok(out)
    }

    fn describe(v: &SliceVerdict) -> String {
        let flagged: Vec<String> = v
            .flagged()
            .map(|m| format!("{}/{} {} [{}]", m.vnf_id, m.vm_id, m.status, m.failing.join(",")))
            .collect();
        if flagged.is_empty() {
            format!("{} {}", v.slice, v.aggregate)
        } else {
            format!("{} {}: {}", v.slice, v.aggregate, flagged.join("; "))
        }
    }

    fn periodic_evaluation(&mut self, slice: &str, tm: &TrustManager, out: &mut Vec<LogEntry>) -> Result<(), SimError> {
        let report = tm.evaluate_slice(self, slice)?;
        let verdict = report.verdict;
        self.push_log(out, LogKind::Evaluation, Self::describe(&verdict));
        let alert = self.scheduler.record(&verdict, self.tick);
        self.verdicts.insert(slice.to_string(), verdict);
        if let Some(alert) = alert {
            self.push_log(out, LogKind::Alert, format!("{} {} -> {}", alert.slice, alert.from, alert.to));
            if self.auto_mitigate && alert.to == Status::Untrusted {
                if let Err(e) = self.mitigate_logged(&alert, tm, out) {
                    self.push_log(out, LogKind::MitigationFailed, e.to_string());
                }
            }
        }
        Ok(())
    }

    /// Isolates each untrusted VM named by the alert, boots a replacement
    /// from the same clean image, gates it, swaps it into the slice and
    /// re-evaluates. Members already isolated are left alone.
    pub fn mitigate(&mut self, alert: &Alert, tm: &TrustManager) -> Result<Vec<MitigationRecord>, SimError> {
        self.mitigate_logged(alert, tm, &mut Vec::new())
    }

    fn mitigate_logged(
        &mut self,
        alert: &Alert,
        tm: &TrustManager,
        out: &mut Vec<LogEntry>,
    ) -> Result<Vec<MitigationRecord>, SimError> {
        let slice = alert.slice.clone();
        if !self.slices.contains_key(&slice) {
            return Err(SimError::UnknownSlice(slice));
        }
        let mut records = Vec::new();
        let mut failure = None;
        for (vnf_id, vm_id) in &alert.flagged {
            match self.vms.get(vm_id) {
                Some(vm) if vm.status == VmStatus::Deployed && vm.slice == slice => {}
                _ => continue,
            }
            self.vms.get_mut(vm_id).expect("vm").status = VmStatus::Isolated;
            self.push_log(out, LogKind::Isolated, vm_id.clone());
            let mut rec = MitigationRecord {
                slice: slice.clone(),
                vnf_id: vnf_id.clone(),
                isolated_vm: vm_id.clone(),
                replacement_vm: None,
                isolated_at: self.tick,
                replaced_at: None,
                reevaluated_at: None,
                outcome: Status::Untrusted,
                descriptor_version: self.slices[&slice].descriptor.version,
            };
            match self.replace(&slice, vnf_id, vm_id, tm, out) {
                Ok(new_id) => {
                    rec.replacement_vm = Some(new_id);
                    rec.replaced_at = Some(self.tick);
                    rec.descriptor_version = self.slices[&slice].descriptor.version;
                }
                Err(e) => {
                    self.push_log(out, LogKind::MitigationFailed, format!("{vm_id}: {e}"));
                    failure.get_or_insert(e);
                }
            }
            records.push(rec);
        }
        if !records.is_empty() {
            let report = tm.evaluate_slice(self, &slice)?;
            let verdict = report.verdict;
            self.push_log(out, LogKind::Reevaluated, Self::describe(&verdict));
            self.scheduler.reset_status(&slice, verdict.aggregate);
            for r in &mut records {
                r.reevaluated_at = Some(self.tick);
                r.outcome = verdict.aggregate;
            }
            self.verdicts.insert(slice.clone(), verdict);
            self.mitigations.extend(records.iter().cloned());
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(records),
        }
    }

    fn replace(
        &mut self,
        slice: &str,
        vnf_id: &str,
        old: &str,
        tm: &TrustManager,
        out: &mut Vec<LogEntry>,
    ) -> Result<String, SimError> {
        let image_name = self.vms[old].image.clone();
        let image = self.image(&image_name)?;
        let reference = tm.authority().references().get(&image_name, HashAlgorithm::Sha256).cloned();
        if reference.map(|r| r.digest) != Some(image.digest()) {
            return Err(SimError::NoCleanImage { vm: old.to_string(), image: image_name });
        }
        let base = strip_replacement_suffix(old).to_string();
        let mut n = self.replacements.get(&base).copied().unwrap_or(0);
        let new_id = loop {
            n += 1;
            let id = format!("{base}_r{n}");
            if !self.vms.contains_key(&id) && !self.vnfs.contains_key(&id) {
                break id;
            }
        };
        self.replacements.insert(base, n);
        let package = self.image(&self.vnfs[vnf_id].package)?.clone();
        let vm = self.stage_vm(&new_id, vnf_id, slice, &image_name, &package)?;
        self.vms.insert(new_id.clone(), vm);
        let realm = self.slices[slice].descriptor.realm.clone();
        let single = SliceMembers {
            slice: slice.to_string(),
            realm,
            members: vec![Member { vnf_id: vnf_id.to_string(), vm_id: new_id.clone() }],
        };
        let (failing, _) = self.gate(&single, tm)?;
        if !failing.is_empty() {
            self.vms.remove(&new_id);
            return Err(SimError::GateFailure { slice: slice.to_string(), failing });
        }
        let d = &mut self.slices.get_mut(slice).expect("slice").descriptor;
        for v in d.vnfs.iter_mut().filter(|v| v.id == vnf_id) {
            for m in v.vms.iter_mut().filter(|m| m.id == old) {
                m.id = new_id.clone();
            }
        }
        d.version += 1;
        self.vms.get_mut(old).expect("old vm").status = VmStatus::Replaced;
        self.vms.get_mut(&new_id).expect("new vm").status = VmStatus::Deployed;
        self.push_log(out, LogKind::Replaced, format!("{old} -> {new_id}"));
        Ok(new_id)
    }

    /// Every VNF and VM of the deployed slices, each once.
    pub fn deployed_placements(&self) -> BTreeSet<(String, String)> {
        self.vms
            .values()
            .filter(|v| v.status == VmStatus::Deployed)
            .map(|v| (v.vnf_id.clone(), v.id.clone()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("simulator state serializes")
    }

    pub fn from_json(text: &str) -> Result<Simulator, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::State(e.to_string()))
    }
}

fn strip_replacement_suffix(id: &str) -> &str {
    match id.rsplit_once("_r") {
        Some((base, n)) if !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()) => base,
        _ => id,
    }
}

impl Infrastructure for Simulator {
    fn slice_members(&self, slice: &str) -> Result<SliceMembers, TrustError> {
        let s = self.slices.get(slice).ok_or_else(|| TrustError::UnknownSlice(slice.to_string()))?;
        Ok(SliceMembers {
            slice: slice.to_string(),
            realm: s.descriptor.realm.clone(),
            members: s
                .descriptor
                .placements()
                .map(|(v, m)| Member { vnf_id: v.id.clone(), vm_id: m.id.clone() })
                .collect(),
        })
    }

    fn snapshot(&self, member: &Member, phase: Phase) -> Result<InfoSnapshot, TrustError> {
        let unknown = || TrustError::UnknownSubject(format!("{}/{}", member.vnf_id, member.vm_id));
        let vm = self.vms.get(&member.vm_id).filter(|v| v.vnf_id == member.vnf_id).ok_or_else(unknown)?;
        let vnf = self.vnfs.get(&member.vnf_id).ok_or_else(unknown)?;
        let package = self.catalog.get(&vnf.package).ok_or_else(unknown)?;
        let image = self.catalog.get(&vm.image).ok_or_else(unknown)?;
        let subject = SubjectInfo {
            vnf_id: vnf.id.clone(),
            vnf_name: vnf.role.clone(),
            vnf_make: package.make.clone(),
            vnf_purpose: vnf.role.clone(),
            vm_id: vm.id.clone(),
            vm_name: vm.image.clone(),
            vim_location: format!("sim-{}", self.seed),
        };
        let vnf_static = package.static_info(&vnf.package_artifact);
        let vm_static = image.static_info(&vm.artifact);
        Ok(match phase {
            Phase::PreDeployment => InfoSnapshot::pre_deployment(subject, vnf_static, vm_static, self.tick),
            Phase::Active => {
                let live = DynamicInfo {
                    processes: vm.live.processes.clone(),
                    memory_integrity: vm.live.memory_integrity,
                    address_randomisation: vm.live.address_randomisation,
                    open_endpoints: vm.live.open_endpoints.clone(),
                    shells: vm.live.shells.clone(),
                };
                InfoSnapshot::active(subject, vnf_static, vm_static, live, self.tick)
            }
        })
    }

    fn now(&self) -> u64 {
        self.tick
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replacement_suffixes() {
        assert_eq!(strip_replacement_suffix("vm3"), "vm3");
        assert_eq!(strip_replacement_suffix("vm3_r2"), "vm3");
        assert_eq!(strip_replacement_suffix("vm_rack"), "vm_rack");
    }
}
