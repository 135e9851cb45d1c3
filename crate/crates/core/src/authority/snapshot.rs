//! Static and dynamic information about a VNF and its service VM.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::credentials::HashAlgorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreDeployment,
    Active,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::PreDeployment => "pre_deployment",
            Phase::Active => "active",
        })
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pre_deployment" => Ok(Phase::PreDeployment),
            "active" => Ok(Phase::Active),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

/// Identity of one member: a VNF and the VM hosting it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectInfo {
    pub vnf_id: String,
    pub vnf_name: String,
    pub vnf_make: String,
    pub vnf_purpose: String,
    pub vm_id: String,
    pub vm_name: String,
    pub vim_location: String,
}

/// Information that holds while the subject is idle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticInfo {
    /// Image or package identity the digest was taken over.
    pub image: String,
    pub algorithm: HashAlgorithm,
    pub digest: String,
    /// Processes and shells the deployment is expected to run.
    pub services: Vec<String>,
    /// Network endpoints the deployment may open.
    pub endpoints: Vec<String>,
    pub build: BTreeMap<String, String>,
}

/// Information gathered while the subject is active.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicInfo {
    pub processes: Vec<String>,
    pub memory_integrity: bool,
    pub address_randomisation: bool,
    pub open_endpoints: Vec<String>,
    pub shells: Vec<String>,
}

/// One information bundle. Dynamic information is present exactly when
/// the phase is active; reads of it are counted.
#[derive(Debug, Serialize, Deserialize)]
pub struct InfoSnapshot {
    pub subject: SubjectInfo,
    pub vnf_static: StaticInfo,
    pub vm_static: StaticInfo,
    dynamic: Option<DynamicInfo>,
    pub captured_at: u64,
    pub phase: Phase,
    #[serde(skip)]
    dynamic_reads: AtomicUsize,
}

impl Clone for InfoSnapshot {
    fn clone(&self) -> Self {
        InfoSnapshot {
            subject: self.subject.clone(),
            vnf_static: self.vnf_static.clone(),
            vm_static: self.vm_static.clone(),
            dynamic: self.dynamic.clone(),
            captured_at: self.captured_at,
            phase: self.phase,
            dynamic_reads: AtomicUsize::new(0),
        }
    }
}

impl PartialEq for InfoSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.subject == other.subject
            && self.vnf_static == other.vnf_static
            && self.vm_static == other.vm_static
            && self.dynamic == other.dynamic
            && self.captured_at == other.captured_at
            && self.phase == other.phase
    }
}

impl Eq for InfoSnapshot {}

impl InfoSnapshot {
    pub fn pre_deployment(subject: SubjectInfo, vnf_static: StaticInfo, vm_static: StaticInfo, captured_at: u64) -> Self {
        InfoSnapshot {
            subject,
            vnf_static,
            vm_static,
            dynamic: None,
            captured_at,
            phase: Phase::PreDeployment,
            dynamic_reads: AtomicUsize::new(0),
        }
    }

    pub fn active(
        subject: SubjectInfo,
        vnf_static: StaticInfo,
        vm_static: StaticInfo,
        dynamic: DynamicInfo,
        captured_at: u64,
    ) -> Self {
        InfoSnapshot {
            subject,
            vnf_static,
            vm_static,
            dynamic: Some(dynamic),
            captured_at,
            phase: Phase::Active,
            dynamic_reads: AtomicUsize::new(0),
        }
    }

    pub fn dynamic(&self) -> Option<&DynamicInfo> {
        self.dynamic_reads.fetch_add(1, Ordering::Relaxed);
        self.dynamic.as_ref()
    }

    pub fn has_dynamic(&self) -> bool {
        self.dynamic.is_some()
    }

    /// How many times dynamic information has been read.
    pub fn dynamic_reads(&self) -> usize {
        self.dynamic_reads.load(Ordering::Relaxed)
    }

    /// Phase and presence of dynamic information agree.
    pub fn is_consistent(&self) -> bool {
        (self.phase == Phase::Active) == self.dynamic.is_some()
    }
}

/// What the authority is asked to attest.
pub type AttestationRequest = InfoSnapshot;
