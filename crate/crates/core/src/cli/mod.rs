//! Command-line front end over a workspace directory.
//!
//! Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success, or slice trusted                 |
//! | 1    | error not listed below                    |
//! | 2    | slice untrusted                           |
//! | 3    | slice uncertain                           |
//! | 4    | unknown slice                             |
//! | 5    | forbidden (policy mutation by non-admin)  |
//! | 6    | deployment gate failed                    |
//! | 7    | workspace busy (lock held)                |
//!
//! Failures print a single line `error:<code>: <message>` to stderr.

mod workspace;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use workspace::{unix_now, LockGuard, Workspace, DEFAULT_WORKSPACE, WORKSPACE_ENV};

use crate::authority::{AuthorityError, CheckerSuite, Phase};
use crate::credentials::{parse_policy, samples, HashAlgorithm, KeyPair};
use crate::lopat::RuleBase;
use crate::nfvsim::{parse_schedule, run_opd_benchmark, BenchConfig, BenchReport, SimError, SliceDescriptor, Simulator};
use crate::policyrepo::{Actor, RepoError};
use crate::trustmgr::{Status, TrustError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNTRUSTED: i32 = 2;
pub const EXIT_UNCERTAIN: i32 = 3;
pub const EXIT_UNKNOWN_SLICE: i32 = 4;
pub const EXIT_FORBIDDEN: i32 = 5;
pub const EXIT_GATE_FAILURE: i32 = 6;
pub const EXIT_BUSY: i32 = 7;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Workspace(String),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown slice `{0}`")]
    UnknownSlice(String),
    #[error("{0}")]
    UnknownPolicy(String),
    #[error("{0}")]
    Duplicate(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    GateFailure(String),
    #[error("workspace {0} is locked by another command")]
    Busy(String),
    #[error("{0}")]
    Sim(String),
    #[error("{0}")]
    Trust(String),
}

impl CliError {
    /// The machine-readable code after `error:`.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Workspace(_) => "workspace",
            CliError::Invalid(_) => "invalid",
            CliError::UnknownSlice(_) => "unknown_slice",
            CliError::UnknownPolicy(_) => "unknown_policy",
            CliError::Duplicate(_) => "duplicate",
            CliError::Forbidden(_) => "forbidden",
            CliError::GateFailure(_) => "gate_failure",
            CliError::Busy(_) => "busy",
            CliError::Sim(_) => "sim",
            CliError::Trust(_) => "trust",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownSlice(_) => EXIT_UNKNOWN_SLICE,
            CliError::Forbidden(_) => EXIT_FORBIDDEN,
            CliError::GateFailure(_) => EXIT_GATE_FAILURE,
            CliError::Busy(_) => EXIT_BUSY,
            _ => EXIT_ERROR,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<RepoError> for CliError {
    fn from(e: RepoError) -> Self {
        match e {
            RepoError::Forbidden { .. } => CliError::Forbidden(e.to_string()),
            RepoError::UnknownPolicy(_) => CliError::UnknownPolicy(e.to_string()),
            RepoError::Duplicate(_) => CliError::Duplicate(e.to_string()),
            RepoError::Invalid(_) | RepoError::BadId(_) => CliError::Invalid(e.to_string()),
            RepoError::Io(_) | RepoError::Corrupt(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<TrustError> for CliError {
    fn from(e: TrustError) -> Self {
        match e {
            TrustError::UnknownSlice(s) => CliError::UnknownSlice(s),
            other => CliError::Trust(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::UnknownSlice(s) => CliError::UnknownSlice(s),
            SimError::GateFailure { .. } => CliError::GateFailure(e.to_string()),
            SimError::Trust(t) => t.into(),
            SimError::Descriptor(_) | SimError::Schedule(_) => CliError::Invalid(e.to_string()),
            other => CliError::Sim(other.to_string()),
        }
    }
}

impl From<AuthorityError> for CliError {
    fn from(e: AuthorityError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "slicetrust", version, about = "Trust evaluation for network slices")]
pub struct Cli {
    /// Workspace root; overrides the SLICETRUST_WORKSPACE variable.
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a workspace with an authority key and the standard image catalog.
    Init {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Ticks between periodic evaluations.
        #[arg(long, default_value_t = crate::nfvsim::DEFAULT_INTERVAL)]
        interval: u64,
        /// Install the sample trust policy.
        #[arg(long)]
        sample_policy: bool,
        /// Reinitialise an existing workspace.
        #[arg(long)]
        force: bool,
    },
    /// Create, deploy and list slices.
    #[command(subcommand)]
    Slice(SliceCmd),
    /// Evaluate slice trust.
    #[command(subcommand)]
    Trust(TrustCmd),
    /// Manage trust policies.
    #[command(subcommand)]
    Policy(PolicyCmd),
    /// Inject events and advance simulated time.
    #[command(subcommand)]
    Sim(SimCmd),
    /// On-boarding delay benchmark.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Trusted authority reference digests.
    #[command(subcommand)]
    Ta(TaCmd),
    /// Rule language tools.
    #[command(subcommand)]
    Lopat(LopatCmd),
}

#[derive(Debug, Subcommand)]
pub enum SliceCmd {
    /// Stage a slice from a descriptor file.
    Create { descriptor: PathBuf },
    /// Run the pre-deployment gate and deploy.
    Deploy { id: String },
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrustCmd {
    /// Evaluate a slice; exit 0 trusted, 2 untrusted, 3 uncertain.
    Eval {
        id: String,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value = "active")]
        phase: String,
    },
}

#[derive(Debug, Args)]
pub struct ActorArgs {
    #[arg(long)]
    pub actor: String,
    #[arg(long)]
    pub role: String,
}

#[derive(Debug, Subcommand)]
pub enum PolicyCmd {
    Add {
        file: PathBuf,
        #[command(flatten)]
        who: ActorArgs,
    },
    Update {
        id: String,
        file: PathBuf,
        #[command(flatten)]
        who: ActorArgs,
    },
    Rm {
        id: String,
        #[command(flatten)]
        who: ActorArgs,
    },
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimCmd {
    /// Queue the events of a schedule file.
    Inject { schedule: PathBuf },
    /// Run simulated time forward.
    Advance { ticks: u64 },
    /// Current tick, VMs and pending events.
    Status,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// On-boarding delay with and without the trust gate.
    Opd {
        #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40])]
        vms: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 300, 400])]
        properties: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output table; defaults to bench/opd.csv in the workspace.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TaCmd {
    /// Register a reference digest read from a file (`<hex>` or sha256sum output).
    RegisterRef {
        identity: String,
        digest_file: PathBuf,
        #[arg(long, default_value = "manufacturer")]
        issuer: String,
        #[arg(long, default_value = "SHA2")]
        algorithm: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum LopatCmd {
    /// Parse and validate a rule file.
    Check { file: PathBuf },
}

impl Command {
    fn is_mutating(&self) -> bool {
        match self {
            Command::Init { .. } | Command::Bench(_) | Command::Ta(_) => true,
            Command::Slice(c) => !matches!(c, SliceCmd::List { .. }),
            Command::Policy(c) => !matches!(c, PolicyCmd::List { .. }),
            Command::Sim(c) => !matches!(c, SimCmd::Status),
            Command::Trust(_) | Command::Lopat(_) => false,
        }
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let _ = writeln!(err, "error:usage: {first}");
            return EXIT_ERROR;
        }
    };
    let ws = Workspace::locate(cli.workspace.clone());
    let mutating = cli.command.is_mutating();
    let line: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = if mutating {
        ws.lock().and_then(|_guard| execute(&ws, &cli.command, out, err))
    } else {
        execute(&ws, &cli.command, out, err)
    };
    let code = match &result {
        Ok(code) => *code,
        Err(e) => {
            let _ = writeln!(err, "error:{}: {}", e.code(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    };
    if mutating && ws.root().is_dir() {
        let outcome = match &result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error:{}", e.code()),
        };
        let _ = ws.append_audit(&line.join(" "), &outcome);
    }
    code
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn status_exit(s: Status) -> i32 {
    match s {
        Status::Trusted => EXIT_OK,
        Status::Untrusted => EXIT_UNTRUSTED,
        Status::Uncertain => EXIT_UNCERTAIN,
    }
}

#[derive(Serialize)]
struct SliceRow<'a> {
    id: &'a str,
    realm: &'a str,
    deployed: bool,
    version: u32,
    members: Vec<(String, String)>,
    last_status: Option<Status>,
}

fn execute(ws: &Workspace, cmd: &Command, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Init { seed, interval, sample_policy, force } => {
            if ws.is_initialised() && !force {
                return Err(CliError::Workspace(format!("{} is already initialised", ws.root().display())));
            }
            for dir in ["policies", "descriptors", "bench"] {
                fs::create_dir_all(ws.path(dir))?;
            }
            workspace::write_atomic(&ws.path("ta.pem"), &KeyPair::from_seed(*seed).to_pem())?;
            workspace::write_atomic(&ws.path("checkers.manifest"), &CheckerSuite::default().to_manifest())?;
            workspace::write_atomic(&ws.path("references.tsv"), "")?;
            let mut sim = Simulator::new(*seed);
            sim.set_interval(*interval)?;
            ws.save_simulator(&sim)?;
            let ta = ws.authority()?;
            sim.register_catalog(&ta)?;
            ws.save_references(&ta)?;
            if *sample_policy {
                let mut repo = ws.policies()?;
                let policy = parse_policy(samples::LISTING_POLICY.as_bytes())
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                if repo.get(&policy.info.id).is_none_or(|r| r.is_deleted()) {
                    repo.add_policy(policy, &Actor::new("init", "admin"))?;
                }
            }
            writeln!(out, "initialised {}", ws.root().display())?;
            Ok(EXIT_OK)
        }
        Command::Slice(SliceCmd::Create { descriptor }) => {
            let d = SliceDescriptor::parse(&read(descriptor)?)?;
            let mut sim = ws.simulator()?;
            let id = d.id.clone();
            sim.create_slice(d.clone())?;
            workspace::write_atomic(&ws.path("descriptors").join(format!("{id}.txt")), &d.to_text())?;
            ws.save_simulator(&sim)?;
            writeln!(out, "created {id}")?;
            Ok(EXIT_OK)
        }
        Command::Slice(SliceCmd::Deploy { id }) => {
            let mut sim = ws.simulator()?;
            let tm = ws.trust_manager()?;
            let result = sim.deploy_slice(id, &tm);
            ws.save_simulator(&sim)?;
            ws.append_trust_audit(&tm.audit_text())?;
            let verdict = result?;
            writeln!(out, "deployed {id}")?;
            write!(out, "{}", verdict.to_text())?;
            Ok(EXIT_OK)
        }
        Command::Slice(SliceCmd::List { json }) => {
            let sim = ws.simulator()?;
            let rows: Vec<SliceRow> = sim
                .slices()
                .map(|s| SliceRow {
                    id: &s.descriptor.id,
                    realm: &s.descriptor.realm,
                    deployed: s.deployed,
                    version: s.descriptor.version,
                    members: s.descriptor.placements().map(|(v, m)| (v.id.clone(), m.id.clone())).collect(),
                    last_status: sim.last_verdict(&s.descriptor.id).map(|v| v.aggregate),
                })
                .collect();
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("rows serialize"))?;
            } else {
                for r in rows {
                    let members: Vec<String> = r.members.iter().map(|(v, m)| format!("{v}@{m}")).collect();
                    let status = r.last_status.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
                    let state = if r.deployed { "deployed" } else { "staged" };
                    writeln!(out, "{}\t{state}\tv{}\t{status}\t{}", r.id, r.version, members.join(","))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Trust(TrustCmd::Eval { id, json, phase }) => {
            let phase: Phase = phase.parse().map_err(CliError::Usage)?;
            let sim = ws.simulator()?;
            let tm = ws.trust_manager()?;
            let report = tm.evaluate_slice_in(&sim, id, phase)?;
            ws.append_trust_audit(&tm.audit_text())?;
            if *json {
                writeln!(out, "{}", report.verdict.to_json())?;
            } else {
                write!(out, "{}", report.verdict.to_text())?;
            }
            Ok(status_exit(report.verdict.aggregate))
        }
        Command::Policy(p) => policy_command(ws, p, out),
        Command::Sim(SimCmd::Inject { schedule }) => {
            let events = parse_schedule(&read(schedule)?)?;
            let mut sim = ws.simulator()?;
            let n = events.len();
            for e in events {
                sim.inject_event(e)?;
            }
            ws.save_simulator(&sim)?;
            writeln!(out, "queued {n} events")?;
            Ok(EXIT_OK)
        }
        Command::Sim(SimCmd::Advance { ticks }) => {
            let mut sim = ws.simulator()?;
            let tm = ws.trust_manager()?;
            let log = sim.advance(*ticks, &tm)?;
            ws.save_simulator(&sim)?;
            ws.append_trust_audit(&tm.audit_text())?;
            for l in log {
                writeln!(out, "{l}")?;
            }
            writeln!(out, "tick {}", sim.tick())?;
            Ok(EXIT_OK)
        }
        Command::Sim(SimCmd::Status) => {
            let sim = ws.simulator()?;
            writeln!(out, "tick {} interval {}", sim.tick(), sim.interval())?;
            for vm in sim.vms() {
                writeln!(out, "vm\t{}\t{}\t{}\t{}", vm.id, vm.vnf_id, vm.slice, vm.status)?;
            }
            for e in sim.pending_events() {
                writeln!(out, "pending\t{}", e.to_line())?;
            }
            Ok(EXIT_OK)
        }
        Command::Bench(BenchCmd::Opd { vms, properties, reps, seed, out: path }) => {
            if vms.is_empty() || properties.is_empty() || *reps == 0 || vms.contains(&0) {
                return Err(CliError::Usage("VM counts and repetitions must be positive".into()));
            }
            let cfg = BenchConfig {
                vm_counts: vms.clone(),
                property_counts: properties.clone(),
                repetitions: *reps,
                seed: *seed,
                ..BenchConfig::default()
            };
            let table = BenchReport::to_csv(&run_opd_benchmark(&cfg));
            let path = path.clone().unwrap_or_else(|| ws.path("bench").join("opd.csv"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            workspace::write_atomic(&path, &table)?;
            write!(out, "{table}")?;
            Ok(EXIT_OK)
        }
        Command::Ta(TaCmd::RegisterRef { identity, digest_file, issuer, algorithm }) => {
            let algo: HashAlgorithm = algorithm.parse().map_err(|e: crate::credentials::CredentialError| {
                CliError::Invalid(e.to_string())
            })?;
            let text = read(digest_file)?;
            let digest = text.split_whitespace().next().unwrap_or("");
            let ta = ws.authority()?;
            ta.register_reference(identity, digest, algo, issuer)?;
            ws.save_references(&ta)?;
            writeln!(out, "registered {identity}")?;
            Ok(EXIT_OK)
        }
        Command::Lopat(LopatCmd::Check { file }) => {
            let rb = RuleBase::from_text("check", &read(file)?).map_err(|e| CliError::Invalid(e.to_string()))?;
            writeln!(out, "ok: {} rules", rb.len())?;
            Ok(EXIT_OK)
        }
    }
}

fn policy_command(ws: &Workspace, cmd: &PolicyCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut repo = ws.policies()?;
    let load = |file: &PathBuf| -> Result<_, CliError> {
        parse_policy(read(file)?.as_bytes()).map_err(|e| CliError::Invalid(e.to_string()))
    };
    let actor = |w: &ActorArgs| Actor::new(w.actor.clone(), w.role.clone());
    match cmd {
        PolicyCmd::Add { file, who } => {
            let rec = repo.add_policy(load(file)?, &actor(who))?;
            writeln!(out, "added {} revision {}", rec.id, rec.revision)?;
        }
        PolicyCmd::Update { id, file, who } => {
            let rec = repo.update_policy(id, load(file)?, &actor(who))?;
            writeln!(out, "updated {} revision {}", rec.id, rec.revision)?;
        }
        PolicyCmd::Rm { id, who } => {
            repo.delete_policy(id, &actor(who))?;
            writeln!(out, "removed {id}")?;
        }
        PolicyCmd::List { json } => {
            if *json {
                let recs: Vec<_> = repo.list().collect();
                writeln!(out, "{}", serde_json::to_string_pretty(&recs).expect("records serialize"))?;
            } else {
                for r in repo.list() {
                    writeln!(out, "{}", r.listing_line())?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}
