//! Slice descriptors.
//!
//! ```text
//! slice NS400
//! realm Domain 1
//! tenant operator-a
//! vnf vnf1 role=router package=router-pkg vms=vm1@ubuntu-22.04
//! vnf vnf3 role=firewall package=firewall-pkg vms=vm3@ubuntu-22.04
//! ```
//!
//! `realm` takes the rest of the line. `vms` lists `<vm id>@<image>`
//! separated by commas. A `version` line is written once the descriptor
//! has been revised.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmSpec {
    pub id: String,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnfDescriptor {
    pub id: String,
    pub role: String,
    pub package: String,
    pub vms: Vec<VmSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceDescriptor {
    pub id: String,
    pub realm: String,
    pub tenants: Vec<String>,
    pub vnfs: Vec<VnfDescriptor>,
    pub version: u32,
}

fn is_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

impl SliceDescriptor {
    /// At least one VNF, at least one VM per VNF, and no id used twice.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |d: String| Err(SimError::Descriptor(d));
        if !is_id(&self.id) {
            return bad(format!("bad slice id `{}`", self.id));
        }
        if self.realm.trim().is_empty() {
            return bad("empty realm".into());
        }
        if self.vnfs.is_empty() {
            return bad(format!("slice `{}` has no VNF", self.id));
        }
        let mut seen = BTreeSet::new();
        for v in &self.vnfs {
            if v.vms.is_empty() {
                return bad(format!("VNF `{}` has no VM", v.id));
            }
            for id in std::iter::once(&v.id).chain(v.vms.iter().map(|m| &m.id)) {
                if !is_id(id) {
                    return bad(format!("bad id `{id}`"));
                }
                if !seen.insert(id.clone()) {
                    return bad(format!("id `{id}` used twice"));
                }
            }
        }
        Ok(())
    }

    /// `(vnf id, vm id)` for every placement, in descriptor order.
    pub fn placements(&self) -> impl Iterator<Item = (&VnfDescriptor, &VmSpec)> {
        self.vnfs.iter().flat_map(|v| v.vms.iter().map(move |m| (v, m)))
    }

    pub fn vm_ids(&self) -> Vec<&str> {
        self.placements().map(|(_, m)| m.id.as_str()).collect()
    }

    pub fn parse(text: &str) -> Result<SliceDescriptor, SimError> {
        let mut d = SliceDescriptor { id: String::new(), realm: String::new(), tenants: vec![], vnfs: vec![], version: 1 };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |detail: &str| SimError::Descriptor(format!("line {}: {detail}", i + 1));
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match key {
                "slice" => d.id = rest.to_string(),
                "realm" => d.realm = rest.to_string(),
                "tenant" => d.tenants.push(rest.to_string()),
                "version" => d.version = rest.parse().map_err(|_| bad("bad version"))?,
                "vnf" => {
                    let mut words = rest.split_whitespace();
                    let id = words.next().ok_or_else(|| bad("missing VNF id"))?.to_string();
                    let (mut role, mut package, mut vms) = (None, None, None);
                    for w in words {
                        let (k, v) = w.split_once('=').ok_or_else(|| bad(w))?;
                        match k {
                            "role" => role = Some(v.to_string()),
                            "package" => package = Some(v.to_string()),
                            "vms" => {
                                let list: Result<Vec<VmSpec>, SimError> = v
                                    .split(',')
                                    .map(|s| {
                                        let (id, image) = s.split_once('@').ok_or_else(|| bad(s))?;
                                        Ok(VmSpec { id: id.to_string(), image: image.to_string() })
                                    })
                                    .collect();
                                vms = Some(list?);
                            }
                            _ => return Err(bad(w)),
                        }
                    }
                    d.vnfs.push(VnfDescriptor {
                        id,
                        role: role.ok_or_else(|| bad("missing role"))?,
                        package: package.ok_or_else(|| bad("missing package"))?,
                        vms: vms.ok_or_else(|| bad("missing vms"))?,
                    });
                }
                other => return Err(bad(other)),
            }
        }
        d.validate()?;
        Ok(d)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("slice {}\nrealm {}\n", self.id, self.realm);
        for t in &self.tenants {
            out.push_str(&format!("tenant {t}\n"));
        }
        if self.version != 1 {
            out.push_str(&format!("version {}\n", self.version));
        }
        for v in &self.vnfs {
            let vms: Vec<String> = v.vms.iter().map(|m| format!("{}@{}", m.id, m.image)).collect();
            out.push_str(&format!("vnf {} role={} package={} vms={}\n", v.id, v.role, v.package, vms.join(",")));
        }
        out
    }

    /// The two-VNF slice used in demonstrations.
    pub fn ns400() -> SliceDescriptor {
        let text = "slice NS400\nrealm Domain 1\ntenant operator-a\n\
                    vnf vnf1 role=router package=router-pkg vms=vm1@ubuntu-22.04\n\
                    vnf vnf3 role=firewall package=firewall-pkg vms=vm3@ubuntu-22.04\n";
        SliceDescriptor::parse(text).expect("built-in descriptor")
    }
}
