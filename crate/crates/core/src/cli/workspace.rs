//! On-disk workspace: the state every command operates on.
//!
//! ```text
//! <root>/ta.pem             authority signing key
//! <root>/references.tsv     reference digests
//! <root>/checkers.manifest  property checkers
//! <root>/rules.lopat        optional component and slice property rules
//! <root>/policies/          policy repository
//! <root>/descriptors/       slice descriptors as created
//! <root>/sim.json           simulator state
//! <root>/audit.log          one line per mutating command
//! <root>/trust-audit.log    evaluation steps
//! <root>/bench/             benchmark tables
//! <root>/.lock              held while a mutating command runs
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::CliError;
use crate::authority::{CheckerSuite, ReferenceStore, TrustedAuthority};
use crate::credentials::KeyPair;
use crate::lopat::RuleBase;
use crate::nfvsim::Simulator;
use crate::policyrepo::PolicyRepository;
use crate::trustmgr::TrustManager;

/// Overrides the default workspace root.
pub const WORKSPACE_ENV: &str = "SLICETRUST_WORKSPACE";
pub const DEFAULT_WORKSPACE: &str = "slicetrust-ws";

pub struct Workspace {
    root: PathBuf,
}

/// Removes the lock file when dropped.
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn process_alive(pid: i32) -> bool {
    // SAFETY: signal 0 performs error checking only.
    let rc = unsafe { libc::kill(pid, 0) };
    rc == 0 || std::io::Error::last_os_error().raw_os_error() != Some(libc::ESRCH)
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    /// `explicit`, else the environment override, else the default.
    pub fn locate(explicit: Option<PathBuf>) -> Self {
        let root = explicit
            .or_else(|| std::env::var_os(WORKSPACE_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_WORKSPACE));
        Workspace::new(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn is_initialised(&self) -> bool {
        self.path("ta.pem").exists() && self.path("sim.json").exists()
    }

    fn require(&self) -> Result<(), CliError> {
        if self.is_initialised() {
            Ok(())
        } else {
            Err(CliError::Workspace(format!("{} is not initialised; run `init`", self.root.display())))
        }
    }

    /// Takes the workspace lock. A lock left by a dead process is reclaimed.
    pub fn lock(&self) -> Result<LockGuard, CliError> {
        fs::create_dir_all(&self.root)?;
        let path = self.path(".lock");
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())?;
                    return Ok(LockGuard { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let holder = fs::read_to_string(&path).ok().and_then(|s| s.trim().parse::<i32>().ok());
                    match holder {
                        Some(pid) if !process_alive(pid) => {
                            let _ = fs::remove_file(&path);
                        }
                        _ => return Err(CliError::Busy(self.root.display().to_string())),
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(CliError::Busy(self.root.display().to_string()))
    }

    pub fn append_audit(&self, command: &str, outcome: &str) -> Result<(), CliError> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.path("audit.log"))?;
        let command: String = command.chars().map(|c| if c == '\t' || c == '\n' { ' ' } else { c }).collect();
        writeln!(f, "{}\t{}\t{}", unix_now(), command, outcome)?;
        Ok(())
    }

    pub fn append_trust_audit(&self, text: &str) -> Result<(), CliError> {
        if text.is_empty() {
            return Ok(());
        }
        let mut f = OpenOptions::new().create(true).append(true).open(self.path("trust-audit.log"))?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn authority(&self) -> Result<TrustedAuthority, CliError> {
        self.require()?;
        let key = KeyPair::from_pem(&fs::read_to_string(self.path("ta.pem"))?)
            .map_err(|e| CliError::Workspace(format!("ta.pem: {e}")))?;
        let refs = match fs::read_to_string(self.path("references.tsv")) {
            Ok(t) => ReferenceStore::parse(&t).map_err(|e| CliError::Workspace(format!("references.tsv: {e}")))?,
            Err(_) => ReferenceStore::new(),
        };
        let suite = match fs::read_to_string(self.path("checkers.manifest")) {
            Ok(t) => CheckerSuite::parse_manifest(&t).map_err(|e| CliError::Workspace(format!("checkers: {e}")))?,
            Err(_) => CheckerSuite::default(),
        };
        Ok(TrustedAuthority::new("TA", key, refs, suite))
    }

    pub fn save_references(&self, ta: &TrustedAuthority) -> Result<(), CliError> {
        write_atomic(&self.path("references.tsv"), &ta.references().to_text())
    }

    pub fn rules(&self) -> Result<RuleBase, CliError> {
        match fs::read_to_string(self.path("rules.lopat")) {
            Ok(t) => RuleBase::from_text("workspace", &t).map_err(|e| CliError::Invalid(format!("rules.lopat: {e}"))),
            Err(_) => Ok(RuleBase::new("workspace")),
        }
    }

    pub fn policies(&self) -> Result<PolicyRepository, CliError> {
        self.require()?;
        Ok(PolicyRepository::open(self.path("policies"))?)
    }

    pub fn simulator(&self) -> Result<Simulator, CliError> {
        self.require()?;
        Ok(Simulator::from_json(&fs::read_to_string(self.path("sim.json"))?)?)
    }

    pub fn save_simulator(&self, sim: &Simulator) -> Result<(), CliError> {
        write_atomic(&self.path("sim.json"), &sim.to_json())
    }

    /// A trust manager over the workspace authority, policies and rules.
    pub fn trust_manager(&self) -> Result<TrustManager, CliError> {
        let ta = Arc::new(self.authority()?);
        let repo = Arc::new(self.policies()?);
        Ok(TrustManager::new(ta, repo).with_rules(self.rules()?))
    }
}
