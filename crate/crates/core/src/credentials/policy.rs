//! Trust policies.
//!
//! ```text
//! trustPolicy
//!   info   id creator cRole
//!   rule+  target
//!            platform resources
//!            condition/entity  vnf? serviceVM?   (sP* dP*)
//!            action  bTime rTime
//! ```

use std::fmt;
use std::str::FromStr;

use roxmltree::Node;
use serde::{Deserialize, Serialize};

use super::xml::{self, schema, Children, Writer};
use super::CredentialError;

/// Platform selector that matches every slice.
pub const ANY_NETWORK_SLICE: &str = "Any Network Slice";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyVerdict {
    Trusted,
    Untrusted,
}

impl fmt::Display for PolicyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyVerdict::Trusted => "Trusted",
            PolicyVerdict::Untrusted => "Untrusted",
        })
    }
}

impl FromStr for PolicyVerdict {
    type Err = CredentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Trusted" => Ok(PolicyVerdict::Trusted),
            "Untrusted" => Ok(PolicyVerdict::Untrusted),
            other => Err(CredentialError::UnknownVerdict(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyInfo {
    pub id: String,
    pub creator: String,
    pub creator_role: String,
}

/// Required static (`sP`) and dynamic (`dP`) property strings, trimmed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirements {
    pub static_props: Vec<String>,
    pub dynamic_props: Vec<String>,
}

impl Requirements {
    pub fn is_empty(&self) -> bool {
        self.static_props.is_empty() && self.dynamic_props.is_empty()
    }

    pub fn len(&self) -> usize {
        self.static_props.len() + self.dynamic_props.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub platform: String,
    pub resources: String,
    pub vnf: Requirements,
    pub service_vm: Requirements,
    pub boot_time: PolicyVerdict,
    pub run_time: PolicyVerdict,
}

impl PolicyRule {
    pub fn matches_slice(&self, slice_id: &str) -> bool {
        self.platform == ANY_NETWORK_SLICE || self.platform == slice_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustPolicy {
    pub info: PolicyInfo,
    pub rules: Vec<PolicyRule>,
}

fn parse_requirements(node: Node<'_, '_>, path: &str) -> Result<Requirements, CredentialError> {
    let mut c = Children::of(node, path)?;
    let mut req = Requirements::default();
    loop {
        if c.peek_is("sP") {
            req.static_props.push(c.text_of("sP")?);
        } else if c.peek_is("dP") {
            req.dynamic_props.push(c.text_of("dP")?);
        } else {
            break;
        }
    }
    c.finish()?;
    if let Some(empty) = req.static_props.iter().chain(&req.dynamic_props).find(|s| s.is_empty()) {
        return Err(schema(path, format!("empty requirement `{empty}`")));
    }
    Ok(req)
}

/// Parses a policy document, enforcing the element layout exactly.
pub fn parse_policy(document: &[u8]) -> Result<TrustPolicy, CredentialError> {
    let text = xml::parse_document(document)?;
    let doc = xml::parse_tree(&text)?;
    let root = doc.root_element();
    if root.tag_name().name() != "trustPolicy" {
        return Err(schema(root.tag_name().name(), "expected <trustPolicy>"));
    }
    xml::no_attributes(root, "trustPolicy")?;
    let mut top = Children::of(root, "trustPolicy")?;

    let node = top.expect("info")?;
    let mut c = Children::of(node, "trustPolicy/info")?;
    let info = PolicyInfo { id: c.text_of("id")?, creator: c.text_of("creator")?, creator_role: c.text_of("cRole")? };
    c.finish()?;
    if info.id.is_empty() {
        return Err(schema("trustPolicy/info/id", "empty id"));
    }

    let mut rules = Vec::new();
    while top.peek_is("rule") {
        let index = rules.len();
        let rule = top.expect("rule")?;
        let mut r = Children::of(rule, "trustPolicy/rule")?;
        let target = r.expect("target")?;
        r.finish()?;
        let tpath = "trustPolicy/rule/target";
        let mut t = Children::of(target, tpath)?;
        let platform = t.text_of("platform")?;
        let resources = t.text_of("resources")?;
        let condition = t.expect("condition")?;
        let action = t.expect("action")?;
        t.finish()?;

        let cpath = format!("{tpath}/condition");
        let mut cc = Children::of(condition, &cpath)?;
        let entity = cc.expect("entity")?;
        cc.finish()?;
        let epath = format!("{cpath}/entity");
        let mut e = Children::of(entity, &epath)?;
        let vnf = match e.optional("vnf")? {
            Some(n) => parse_requirements(n, &format!("{epath}/vnf"))?,
            None => Requirements::default(),
        };
        let service_vm = match e.optional("serviceVM")? {
            Some(n) => parse_requirements(n, &format!("{epath}/serviceVM"))?,
            None => Requirements::default(),
        };
        e.finish()?;
        if vnf.is_empty() && service_vm.is_empty() {
            return Err(CredentialError::EmptyCondition { rule: index });
        }

        let mut a = Children::of(action, &format!("{tpath}/action"))?;
        let boot_time = a.text_of("bTime")?.parse()?;
        let run_time = a.text_of("rTime")?.parse()?;
        a.finish()?;

        if resources.is_empty() {
            return Err(schema(&format!("{tpath}/resources"), "empty realm"));
        }
        rules.push(PolicyRule { platform, resources, vnf, service_vm, boot_time, run_time });
    }
    top.finish()?;
    if rules.is_empty() {
        return Err(CredentialError::NoRules);
    }
    Ok(TrustPolicy { info, rules })
}

impl TrustPolicy {
    /// Canonical document: four-space indentation, trimmed text.
    pub fn to_xml(&self) -> String {
        let mut w = Writer::pretty("    ");
        w.open("trustPolicy");
        w.open("info");
        w.leaf("id", &self.info.id);
        w.leaf("creator", &self.info.creator);
        w.leaf("cRole", &self.info.creator_role);
        w.close("info");
        for rule in &self.rules {
            w.open("rule");
            w.open("target");
            w.leaf("platform", &rule.platform);
            w.leaf("resources", &rule.resources);
            w.open("condition");
            w.open("entity");
            for (name, req) in [("vnf", &rule.vnf), ("serviceVM", &rule.service_vm)] {
                if req.is_empty() {
                    continue;
                }
                w.open(name);
                for s in &req.static_props {
                    w.leaf("sP", s);
                }
                for d in &req.dynamic_props {
                    w.leaf("dP", d);
                }
                w.close(name);
            }
            w.close("entity");
            w.close("condition");
            w.open("action");
            w.leaf("bTime", &rule.boot_time.to_string());
            w.leaf("rTime", &rule.run_time.to_string());
            w.close("action");
            w.close("target");
            w.close("rule");
        }
        w.close("trustPolicy");
        w.finish()
    }

    /// Distinct realms named by the rules, in first-seen order.
    pub fn realms(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rules {
            if !out.contains(&r.resources.as_str()) {
                out.push(&r.resources);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CredentialError> {
        parse_policy(self.to_xml().as_bytes()).map(|_| ())
    }
}
