//! Trust policy repository.
//!
//! Each live policy is stored as `policies/<id>.xml` (canonical form) and
//! every mutation is recorded in `journal.log`:
//!
//! ```text
//! <seq> <op> <id> <revision> <timestamp> <actor> <role> <realm> <sha256|->
//! ```
//!
//! fields tab separated. A new document is first written to
//! `policies/<id>.xml.tmp`; the journal line is the commit point; the rename
//! follows. Reloading rolls committed temporaries forward and discards
//! uncommitted ones.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::credentials::{parse_policy, CredentialError, PolicyRule, TrustPolicy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RepoError {
    #[error("actor `{actor}` with role `{role}` may not modify policies")]
    Forbidden { actor: String, role: String },
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("policy `{0}` already exists")]
    Duplicate(String),
    #[error("invalid policy: {0}")]
    Invalid(#[from] CredentialError),
    #[error("policy id `{0}` cannot be used as a file name")]
    BadId(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl From<std::io::Error> for RepoError {
    fn from(e: std::io::Error) -> Self {
        RepoError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub name: String,
    pub role: String,
}

impl Actor {
    pub fn new(name: impl Into<String>, role: impl Into<String>) -> Self {
        Actor { name: name.into(), role: role.into() }
    }

    pub fn is_admin(&self) -> bool {
        self.role == "admin"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    Vnf,
    ServiceVm,
    Slice,
}

impl FromStr for SubjectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vnf" => Ok(SubjectKind::Vnf),
            "service_vm" => Ok(SubjectKind::ServiceVm),
            "slice" => Ok(SubjectKind::Slice),
            other => Err(format!("unknown subject kind `{other}`")),
        }
    }
}

impl SubjectKind {
    /// Whether a rule has requirements for this kind. No rule element
    /// addresses slices directly.
    pub fn covers(self, rule: &PolicyRule) -> bool {
        match self {
            SubjectKind::Vnf => !rule.vnf.is_empty(),
            SubjectKind::ServiceVm => !rule.service_vm.is_empty(),
            SubjectKind::Slice => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Op {
    Add,
    Update,
    Delete,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Add => "add",
            Op::Update => "update",
            Op::Delete => "delete",
        })
    }
}

/// A stored policy and its history metadata. Deleted policies remain as
/// tombstones without content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub id: String,
    pub policy: Option<TrustPolicy>,
    pub realm: String,
    pub revision: u64,
    pub created: u64,
    pub updated: u64,
    pub creator: String,
    pub creator_role: String,
}

impl PolicyRecord {
    pub fn is_deleted(&self) -> bool {
        self.policy.is_none()
    }

    /// `id realm revision creator`, tab separated, plus `deleted` for
    /// tombstones.
    pub fn listing_line(&self) -> String {
        let mut s = format!("{}\t{}\t{}\t{}", self.id, self.realm, self.revision, self.creator);
        if self.is_deleted() {
            s.push_str("\tdeleted");
        }
        s
    }
}

fn now_secs() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn sha(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && !id.starts_with('.')
}

/// The repository. Persistence is optional so it can also run in memory.
#[derive(Debug, Clone)]
pub struct PolicyRepository {
    root: Option<PathBuf>,
    records: BTreeMap<String, PolicyRecord>,
    seq: u64,
    clock: fn() -> u64,
}

impl PartialEq for PolicyRepository {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records && self.seq == other.seq
    }
}

impl PolicyRepository {
    pub fn in_memory() -> Self {
        PolicyRepository { root: None, records: BTreeMap::new(), seq: 0, clock: now_secs }
    }

    pub fn with_clock(mut self, clock: fn() -> u64) -> Self {
        self.clock = clock;
        self
    }

    /// Opens (or creates) a repository directory and replays its journal.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, RepoError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("policies"))?;
        let mut repo = PolicyRepository { root: Some(root.clone()), records: BTreeMap::new(), seq: 0, clock: now_secs };
        let journal = root.join("journal.log");
        let text = if journal.exists() { fs::read_to_string(&journal)? } else { String::new() };
        let mut digests: BTreeMap<String, Option<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let corrupt = || RepoError::Corrupt(format!("journal line {}", i + 1));
            let f: Vec<&str> = line.split('\t').collect();
            let [seq, op, id, rev, ts, actor, role, realm, digest] = f.as_slice() else {
                return Err(corrupt());
            };
            let seq: u64 = seq.parse().map_err(|_| corrupt())?;
            let rev: u64 = rev.parse().map_err(|_| corrupt())?;
            let ts: u64 = ts.parse().map_err(|_| corrupt())?;
            repo.seq = seq;
            match *op {
                "add" | "update" => {
                    let rec = repo.records.entry(id.to_string()).or_insert_with(|| PolicyRecord {
                        id: id.to_string(),
                        policy: None,
                        realm: String::new(),
                        revision: 0,
                        created: ts,
                        updated: ts,
                        creator: actor.to_string(),
                        creator_role: role.to_string(),
                    });
                    if *op == "add" && rec.revision == 0 {
                        rec.created = ts;
                    }
                    rec.revision = rev;
                    rec.updated = ts;
                    rec.realm = realm.to_string();
                    if *op == "add" {
                        rec.creator = actor.to_string();
                        rec.creator_role = role.to_string();
                        rec.created = ts;
                    }
                    digests.insert(id.to_string(), Some(digest.to_string()));
                }
                "delete" => {
                    let rec = repo.records.get_mut(*id).ok_or_else(corrupt)?;
                    rec.revision = rev;
                    rec.updated = ts;
                    digests.insert(id.to_string(), None);
                }
                _ => return Err(corrupt()),
            }
        }
        // Reconcile documents with the journal.
        for (id, digest) in &digests {
            let file = repo.file(id);
            let tmp = repo.tmp(id);
            match digest {
                Some(d) => {
                    if tmp.exists() && sha(&fs::read_to_string(&tmp)?) == *d {
                        fs::rename(&tmp, &file)?;
                    }
                    let text = fs::read_to_string(&file)
                        .map_err(|_| RepoError::Corrupt(format!("missing document for `{id}`")))?;
                    if sha(&text) != *d {
                        return Err(RepoError::Corrupt(format!("document for `{id}` does not match journal")));
                    }
                    let policy = parse_policy(text.as_bytes())?;
                    repo.records.get_mut(id).expect("journalled").policy = Some(policy);
                }
                None => {
                    if file.exists() {
                        fs::remove_file(&file)?;
                    }
                }
            }
        }
        for entry in fs::read_dir(root.join("policies"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "tmp") {
                fs::remove_file(path)?;
            }
        }
        Ok(repo)
    }

    fn file(&self, id: &str) -> PathBuf {
        self.root.as_ref().expect("persistent").join("policies").join(format!("{id}.xml"))
    }

    fn tmp(&self, id: &str) -> PathBuf {
        self.root.as_ref().expect("persistent").join("policies").join(format!("{id}.xml.tmp"))
    }

    fn commit(&mut self, op: Op, rec: &PolicyRecord, actor: &Actor) -> Result<(), RepoError> {
        let seq = self.seq + 1;
        let text = rec.policy.as_ref().map(TrustPolicy::to_xml);
        if let Some(root) = &self.root {
            if let Some(t) = &text {
                fs::write(self.tmp(&rec.id), t)?;
            }
            let line = format!(
                "{seq}\t{op}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                rec.id,
                rec.revision,
                rec.updated,
                actor.name,
                actor.role,
                rec.realm,
                text.as_deref().map(sha).unwrap_or_else(|| "-".into())
            );
            let mut journal = OpenOptions::new().create(true).append(true).open(root.join("journal.log"))?;
            journal.write_all(line.as_bytes())?;
            journal.sync_all()?;
            match text {
                Some(_) => fs::rename(self.tmp(&rec.id), self.file(&rec.id))?,
                None => {
                    let f = self.file(&rec.id);
                    if f.exists() {
                        fs::remove_file(f)?;
                    }
                }
            }
        }
        self.seq = seq;
        self.records.insert(rec.id.clone(), rec.clone());
        Ok(())
    }

    fn authorize(actor: &Actor) -> Result<(), RepoError> {
        if actor.is_admin() {
            Ok(())
        } else {
            Err(RepoError::Forbidden { actor: actor.name.clone(), role: actor.role.clone() })
        }
    }

    fn check_fields(actor: &Actor, policy: &TrustPolicy) -> Result<String, RepoError> {
        for field in [&actor.name, &actor.role] {
            if field.is_empty() || field.contains(['\t', '\n']) {
                return Err(RepoError::BadId(field.clone()));
            }
        }
        if !valid_id(&policy.info.id) {
            return Err(RepoError::BadId(policy.info.id.clone()));
        }
        policy.validate()?;
        let realm = policy.rules[0].resources.clone();
        if realm.contains(['\t', '\n']) {
            return Err(RepoError::BadId(realm));
        }
        Ok(realm)
    }

    pub fn add_policy(&mut self, policy: TrustPolicy, actor: &Actor) -> Result<PolicyRecord, RepoError> {
        Self::authorize(actor)?;
        let realm = Self::check_fields(actor, &policy)?;
        let id = policy.info.id.clone();
        let now = (self.clock)();
        let revision = match self.records.get(&id) {
            Some(r) if !r.is_deleted() => return Err(RepoError::Duplicate(id)),
            Some(r) => r.revision + 1,
            None => 1,
        };
        let rec = PolicyRecord {
            id,
            policy: Some(policy),
            realm,
            revision,
            created: now,
            updated: now,
            creator: actor.name.clone(),
            creator_role: actor.role.clone(),
        };
        self.commit(Op::Add, &rec, actor)?;
        Ok(rec)
    }

    pub fn update_policy(&mut self, id: &str, policy: TrustPolicy, actor: &Actor) -> Result<PolicyRecord, RepoError> {
        Self::authorize(actor)?;
        let realm = Self::check_fields(actor, &policy)?;
        if policy.info.id != id {
            return Err(RepoError::BadId(policy.info.id.clone()));
        }
        let mut rec = match self.records.get(id) {
            Some(r) if !r.is_deleted() => r.clone(),
            _ => return Err(RepoError::UnknownPolicy(id.to_string())),
        };
        rec.policy = Some(policy);
        rec.realm = realm;
        rec.revision += 1;
        rec.updated = (self.clock)();
        self.commit(Op::Update, &rec, actor)?;
        Ok(rec)
    }

    pub fn delete_policy(&mut self, id: &str, actor: &Actor) -> Result<(), RepoError> {
        Self::authorize(actor)?;
        let mut rec = match self.records.get(id) {
            Some(r) if !r.is_deleted() => r.clone(),
            _ => return Err(RepoError::UnknownPolicy(id.to_string())),
        };
        rec.policy = None;
        rec.revision += 1;
        rec.updated = (self.clock)();
        self.commit(Op::Delete, &rec, actor)
    }

    pub fn get(&self, id: &str) -> Option<&PolicyRecord> {
        self.records.get(id)
    }

    /// Every record, tombstones included, ordered by id.
    pub fn list(&self) -> impl Iterator<Item = &PolicyRecord> {
        self.records.values()
    }

    pub fn live(&self) -> impl Iterator<Item = &PolicyRecord> {
        self.records.values().filter(|r| !r.is_deleted())
    }

    /// Live policies with a rule for `realm` that has requirements for
    /// `kind`, keeping only those rules; ordered by (id, revision).
    pub fn fetch_policies(&self, realm: &str, kind: SubjectKind) -> Vec<TrustPolicy> {
        self.fetch_where(|r| r.resources == realm && kind.covers(r))
    }

    /// As [`fetch_policies`](Self::fetch_policies), additionally requiring
    /// the rule's platform selector to match `slice_id`.
    pub fn fetch_policies_for_slice(&self, realm: &str, slice_id: &str, kind: SubjectKind) -> Vec<TrustPolicy> {
        self.fetch_where(|r| r.resources == realm && kind.covers(r) && r.matches_slice(slice_id))
    }

    fn fetch_where(&self, keep: impl Fn(&PolicyRule) -> bool) -> Vec<TrustPolicy> {
        let mut out: Vec<(&String, u64, TrustPolicy)> = Vec::new();
        for rec in self.live() {
            let policy = rec.policy.as_ref().expect("live");
            let rules: Vec<PolicyRule> = policy.rules.iter().filter(|r| keep(r)).cloned().collect();
            if !rules.is_empty() {
                out.push((&rec.id, rec.revision, TrustPolicy { info: policy.info.clone(), rules }));
            }
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out.into_iter().map(|(_, _, p)| p).collect()
    }
}
