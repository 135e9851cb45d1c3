use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slicetrust::trustmgr::{SliceVerdict, Status};

const BIN: &str = env!("CARGO_BIN_EXE_slicetrust");
const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn st(ws: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("--workspace").arg(ws).args(args).env_remove("SLICETRUST_WORKSPACE").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn audit_lines(ws: &Path) -> Vec<String> {
    fs::read_to_string(ws.join("audit.log")).unwrap_or_default().lines().map(String::from).collect()
}

fn deployed_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    assert_eq!(code(&st(ws, &["init", "--sample-policy"])), 0);
    assert_eq!(code(&st(ws, &["slice", "create", &format!("{DATA}/ns400.slice")])), 0);
    let o = st(ws, &["slice", "deploy", "NS400"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir
}

#[test]
fn bomb_scenario_exit_codes() {
    let dir = deployed_workspace();
    let ws = dir.path();
    assert_eq!(code(&st(ws, &["trust", "eval", "NS400"])), 0);
    assert_eq!(code(&st(ws, &["sim", "inject", &format!("{DATA}/bomb.schedule")])), 0);
    assert_eq!(code(&st(ws, &["sim", "advance", "14"])), 0);

    let o = st(ws, &["trust", "eval", "NS400", "--json"]);
    assert_eq!(code(&o), 2);
    let v = SliceVerdict::from_json(&stdout(&o)).unwrap();
    assert_eq!(v.aggregate, Status::Untrusted);
    let flagged: Vec<_> = v.flagged().map(|m| m.vm_id.as_str()).collect();
    assert_eq!(flagged, vec!["vm3"]);

    let o = st(ws, &["sim", "advance", "1"]);
    assert!(stdout(&o).contains("vm3 -> vm3_r1"), "{}", stdout(&o));
    assert_eq!(code(&st(ws, &["trust", "eval", "NS400"])), 0);
    let list = stdout(&st(ws, &["slice", "list"]));
    assert!(list.contains("NS400\tdeployed\tv2\ttrusted\tvnf1@vm1,vnf3@vm3_r1"), "{list}");

    let trust_log = fs::read_to_string(ws.join("trust-audit.log")).unwrap();
    assert!(trust_log.lines().all(|l| slicetrust::trustmgr::AuditEvent::parse_line(l).is_some()));
}

#[test]
fn error_exit_codes() {
    let dir = deployed_workspace();
    let ws = dir.path();
    let o = st(ws, &["trust", "eval", "NS999"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).starts_with("error:unknown_slice:"), "{}", stderr(&o));
    assert_eq!(code(&st(ws, &["policy", "rm", "01", "--actor", "eve", "--role", "tenant"])), 5);
    assert_eq!(code(&st(ws, &["frobnicate"])), 1);
    assert_eq!(code(&st(ws, &["sim", "advance", "zero"])), 1);
    assert_eq!(code(&st(ws, &["trust", "eval", "NS400", "--phase", "sometime"])), 1);
    assert_eq!(code(&st(ws, &["--help"])), 0);

    let uninit = tempfile::tempdir().unwrap();
    assert_eq!(code(&st(uninit.path(), &["trust", "eval", "NS400"])), 1);
}

#[test]
fn gate_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    assert_eq!(code(&st(ws, &["init"])), 0);
    assert_eq!(code(&st(ws, &["slice", "create", &format!("{DATA}/ns400.slice")])), 0);
    // No policy installed: every member is uncertain and the gate refuses.
    let o = st(ws, &["slice", "deploy", "NS400"]);
    assert_eq!(code(&o), 6, "{}", stderr(&o));
    assert!(stdout(&st(ws, &["slice", "list"])).contains("NS400\tstaged"));
}

#[test]
fn rejected_policy_mutation_leaves_store_unchanged() {
    let dir = deployed_workspace();
    let ws = dir.path();
    let before = stdout(&st(ws, &["policy", "list", "--json"]));
    let journal = fs::read(ws.join("policies/journal.log")).unwrap();
    let policy = format!("{DATA}/sample_policy.xml");
    assert_eq!(code(&st(ws, &["policy", "update", "01", &policy, "--actor", "eve", "--role", "operator"])), 5);
    assert_eq!(code(&st(ws, &["policy", "add", &policy, "--actor", "eve", "--role", "operator"])), 5);
    assert_eq!(stdout(&st(ws, &["policy", "list", "--json"])), before);
    assert_eq!(fs::read(ws.join("policies/journal.log")).unwrap(), journal);

    let o = st(ws, &["policy", "update", "01", &policy, "--actor", "bob", "--role", "admin"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "updated 01 revision 2");
    assert_eq!(code(&st(ws, &["policy", "add", &policy, "--actor", "bob", "--role", "admin"])), 1);
}

#[test]
fn one_audit_line_per_mutating_command() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let mutating: Vec<Vec<String>> = vec![
        vec!["init".into(), "--sample-policy".into()],
        vec!["slice".into(), "create".into(), format!("{DATA}/ns400.slice")],
        vec!["slice".into(), "deploy".into(), "NS400".into()],
        vec!["slice".into(), "deploy".into(), "NS400".into()],
        vec!["sim".into(), "advance".into(), "3".into()],
        vec!["policy".into(), "rm".into(), "01".into(), "--actor".into(), "x".into(), "--role".into(), "y".into()],
    ];
    for (i, args) in mutating.iter().enumerate() {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        st(ws, &args);
        assert_eq!(audit_lines(ws).len(), i + 1);
        for ro in [&["slice", "list"][..], &["sim", "status"], &["policy", "list"], &["trust", "eval", "NS400"]] {
            st(ws, ro);
        }
        assert_eq!(audit_lines(ws).len(), i + 1);
    }
    let lines = audit_lines(ws);
    let outcomes: Vec<&str> = lines.iter().map(|l| l.rsplit('\t').next().unwrap()).collect();
    assert_eq!(outcomes, vec!["ok", "ok", "ok", "error:sim", "ok", "error:forbidden"]);
    assert!(lines.iter().all(|l| l.split('\t').count() == 3));
}

#[test]
fn held_lock_reports_busy() {
    let dir = deployed_workspace();
    let ws = dir.path();
    fs::write(ws.join(".lock"), format!("{}\n", std::process::id())).unwrap();
    let o = st(ws, &["sim", "advance", "1"]);
    assert_eq!(code(&o), 7, "{}", stderr(&o));
    assert_eq!(code(&st(ws, &["trust", "eval", "NS400"])), 0);

    // A lock left by a process that no longer exists is reclaimed.
    let mut child = Command::new("true").spawn().unwrap();
    let pid = child.id();
    child.wait().unwrap();
    fs::write(ws.join(".lock"), format!("{pid}\n")).unwrap();
    assert_eq!(code(&st(ws, &["sim", "advance", "1"])), 0);
    assert!(!ws.join(".lock").exists());
}

#[test]
fn lopat_check_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let rules = ws.join("r.lopat");
    fs::write(&rules, "SatC(x, a) <- SatC(x, b).\n").unwrap();
    let o = st(ws, &["lopat", "check", rules.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "ok: 1 rules");
    fs::write(&rules, "SatC(x, a) <- .\n").unwrap();
    assert_eq!(code(&st(ws, &["lopat", "check", rules.to_str().unwrap()])), 1);

    let csv = ws.join("opd.csv");
    let o = st(ws, &["bench", "opd", "--vms", "2", "--properties", "0,5", "--reps", "1", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(table, stdout(&o));
    assert_eq!(table.lines().count(), 3);
}
