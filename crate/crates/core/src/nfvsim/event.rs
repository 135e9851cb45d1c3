//! Scheduled state mutations.
//!
//! Schedule files hold one event per line:
//!
//! ```text
//! # tick kind target [payload]
//! 10 trigger_logic_bomb vm3
//! 12 tamper_image vm1
//! 20 custom vm1 +proc:cryptominer;aslr:off
//! ```
//!
//! Payload mutations are separated by `;`: `+proc:<name>`, `-proc:<name>`,
//! `+shell:<name>`, `-shell:<name>`, `+endpoint:<addr>`, `aslr:on|off`,
//! `memory:ok|bad`, `artifact:<text>`. The first two kinds have default
//! payloads; an explicit payload replaces the default.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TriggerLogicBomb,
    TamperImage,
    Custom,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::TriggerLogicBomb => "trigger_logic_bomb",
            EventKind::TamperImage => "tamper_image",
            EventKind::Custom => "custom",
        })
    }
}

impl FromStr for EventKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trigger_logic_bomb" => Ok(EventKind::TriggerLogicBomb),
            "tamper_image" => Ok(EventKind::TamperImage),
            "custom" => Ok(EventKind::Custom),
            other => Err(SimError::Schedule(format!("unknown event kind `{other}`"))),
        }
    }
}

/// The script the logic bomb runs as.
pub const LOGIC_BOMB: &str = "logicBOMB.sh";
/// The shell the bomb spawns.
pub const BOMB_SHELL: &str = "zsh";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    AddProcess(String),
    RemoveProcess(String),
    AddShell(String),
    RemoveShell(String),
    OpenEndpoint(String),
    AddressRandomisation(bool),
    MemoryIntegrity(bool),
    /// Appended to the VM's artifact, changing its measured digest.
    AppendArtifact(String),
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::AddProcess(p) => write!(f, "+proc:{p}"),
            Mutation::RemoveProcess(p) => write!(f, "-proc:{p}"),
            Mutation::AddShell(p) => write!(f, "+shell:{p}"),
            Mutation::RemoveShell(p) => write!(f, "-shell:{p}"),
            Mutation::OpenEndpoint(e) => write!(f, "+endpoint:{e}"),
            Mutation::AddressRandomisation(on) => write!(f, "aslr:{}", if *on { "on" } else { "off" }),
            Mutation::MemoryIntegrity(ok) => write!(f, "memory:{}", if *ok { "ok" } else { "bad" }),
            Mutation::AppendArtifact(t) => write!(f, "artifact:{t}"),
        }
    }
}

impl FromStr for Mutation {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SimError::Schedule(format!("bad mutation `{s}`"));
        let (k, v) = s.split_once(':').ok_or_else(bad)?;
        if v.is_empty() || v.contains(char::is_whitespace) || v.contains(';') {
            return Err(bad());
        }
        Ok(match (k, v) {
            ("+proc", p) => Mutation::AddProcess(p.into()),
            ("-proc", p) => Mutation::RemoveProcess(p.into()),
            ("+shell", p) => Mutation::AddShell(p.into()),
            ("-shell", p) => Mutation::RemoveShell(p.into()),
            ("+endpoint", e) => Mutation::OpenEndpoint(e.into()),
            ("aslr", "on") => Mutation::AddressRandomisation(true),
            ("aslr", "off") => Mutation::AddressRandomisation(false),
            ("memory", "ok") => Mutation::MemoryIntegrity(true),
            ("memory", "bad") => Mutation::MemoryIntegrity(false),
            ("artifact", t) => Mutation::AppendArtifact(t.into()),
            _ => return Err(bad()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub at: u64,
    pub kind: EventKind,
    pub target: String,
    pub payload: Vec<Mutation>,
}

impl SimEvent {
    pub fn new(at: u64, kind: EventKind, target: impl Into<String>) -> Self {
        let payload = match kind {
            EventKind::TriggerLogicBomb => vec![
                Mutation::AddProcess(LOGIC_BOMB.into()),
                Mutation::AddShell(BOMB_SHELL.into()),
                Mutation::AddressRandomisation(false),
            ],
            EventKind::TamperImage => vec![Mutation::AppendArtifact(format!("tampered@{at}"))],
            EventKind::Custom => Vec::new(),
        };
        SimEvent { at, kind, target: target.into(), payload }
    }

    pub fn custom(at: u64, target: impl Into<String>, payload: Vec<Mutation>) -> Self {
        SimEvent { at, kind: EventKind::Custom, target: target.into(), payload }
    }

    pub fn to_line(&self) -> String {
        let payload: Vec<String> = self.payload.iter().map(|m| m.to_string()).collect();
        format!("{} {} {} {}", self.at, self.kind, self.target, payload.join(";")).trim_end().to_string()
    }

    pub fn parse_line(line: &str) -> Result<SimEvent, SimError> {
        let bad = || SimError::Schedule(format!("bad event line `{line}`"));
        let words: Vec<&str> = line.split_whitespace().collect();
        let (at, kind, target, payload) = match words.as_slice() {
            [at, kind, target] => (at, kind, target, None),
            [at, kind, target, payload] => (at, kind, target, Some(payload)),
            _ => return Err(bad()),
        };
        let mut e = SimEvent::new(at.parse().map_err(|_| bad())?, kind.parse()?, *target);
        if let Some(p) = payload {
            e.payload = p.split(';').map(str::parse).collect::<Result<_, _>>()?;
        }
        Ok(e)
    }
}

pub fn parse_schedule(text: &str) -> Result<Vec<SimEvent>, SimError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(SimEvent::parse_line)
        .collect()
}

pub fn schedule_to_text(events: &[SimEvent]) -> String {
    events.iter().map(|e| e.to_line() + "\n").collect()
}
