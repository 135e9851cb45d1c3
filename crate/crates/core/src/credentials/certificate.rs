//! VNF property attestation certificates.
//!
//! The document layout is fixed:
//!
//! ```text
//! vnfCertificate
//!   certificateInfo  id issuer issuerKey signAlgo digitalSign validity
//!   vnfInfo          id vnfName vnfMake vnfPurpose vnfMap/serviceVMinfo+
//!   staticProperty   vnfHashinfo serviceVMHashinfo      (value issuer type)
//!   dynamicProperty  vnfProperty/p*  serviceVMProperty/p*  (p may hold <v>)
//! ```
//!
//! `validity` may carry an `issued` attribute (unix seconds) so expiry can
//! be computed; no other attribute is accepted anywhere.

use std::fmt;
use std::str::FromStr;

use roxmltree::{Node, NodeType};

use super::signing::{KeyPair, PublicKey, Signature, SIGN_ALGO};
use super::xml::{self, leaf_text, schema, Children, Writer};
use super::{CredentialError, HashAlgorithm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DurationUnit {
    Seconds,
    Minutes,
    Hours,
    Days,
}

impl DurationUnit {
    fn label(self) -> &'static str {
        match self {
            DurationUnit::Seconds => "s",
            DurationUnit::Minutes => "min",
            DurationUnit::Hours => "hr",
            DurationUnit::Days => "d",
        }
    }

    fn seconds(self) -> u64 {
        match self {
            DurationUnit::Seconds => 1,
            DurationUnit::Minutes => 60,
            DurationUnit::Hours => 3600,
            DurationUnit::Days => 86_400,
        }
    }
}

/// Validity window such as `24hr`, optionally anchored at an issuance time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Validity {
    pub amount: u64,
    pub unit: DurationUnit,
    pub issued_at: Option<u64>,
}

impl Validity {
    pub fn hours(amount: u64) -> Self {
        Validity { amount, unit: DurationUnit::Hours, issued_at: None }
    }

    pub fn duration_secs(&self) -> u64 {
        self.amount.saturating_mul(self.unit.seconds())
    }

    /// `true` when `now` lies inside the window. An unanchored window cannot
    /// expire.
    pub fn covers(&self, now: u64) -> bool {
        match self.issued_at {
            Some(issued) => now >= issued && now < issued.saturating_add(self.duration_secs()),
            None => true,
        }
    }
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.amount, self.unit.label())
    }
}

impl FromStr for Validity {
    type Err = CredentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let amount: u64 = num.parse().map_err(|_| CredentialError::Validity(s.to_string()))?;
        let unit = match unit {
            "s" => DurationUnit::Seconds,
            "min" => DurationUnit::Minutes,
            "hr" => DurationUnit::Hours,
            "d" => DurationUnit::Days,
            _ => return Err(CredentialError::Validity(s.to_string())),
        };
        if amount == 0 {
            return Err(CredentialError::Validity(s.to_string()));
        }
        Ok(Validity { amount, unit, issued_at: None })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateInfo {
    pub id: String,
    pub issuer: String,
    pub issuer_key: String,
    pub sign_algo: String,
    pub digital_sign: String,
    pub validity: Validity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceVmInfo {
    pub vmid: String,
    pub vm_name: String,
    pub vim_location: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VnfInfo {
    pub id: String,
    pub name: String,
    pub make: String,
    pub purpose: String,
    pub vnf_map: Vec<ServiceVmInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashInfo {
    /// Lowercase hex digest.
    pub value: String,
    pub issuer: String,
    /// Algorithm label as written, e.g. `SHA2`.
    pub kind: String,
}

impl HashInfo {
    pub fn sha256(value: impl Into<String>, issuer: impl Into<String>) -> Self {
        HashInfo { value: value.into(), issuer: issuer.into(), kind: HashAlgorithm::Sha256.label().into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticProperties {
    pub vnf_hash: HashInfo,
    pub service_vm_hash: HashInfo,
}

/// One attested property: the raw string and an optional numeric value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyEntry {
    pub text: String,
    pub value: Option<String>,
}

impl PropertyEntry {
    pub fn new(text: impl Into<String>) -> Self {
        PropertyEntry { text: text.into(), value: None }
    }

    pub fn with_value(text: impl Into<String>, value: impl Into<String>) -> Self {
        PropertyEntry { text: text.into(), value: Some(value.into()) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DynamicProperties {
    pub vnf: Vec<PropertyEntry>,
    pub service_vm: Vec<PropertyEntry>,
}

impl DynamicProperties {
    pub fn is_empty(&self) -> bool {
        self.vnf.is_empty() && self.service_vm.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyCertificate {
    pub info: CertificateInfo,
    pub vnf: VnfInfo,
    pub static_props: StaticProperties,
    pub dynamic_props: DynamicProperties,
}

fn check_hash(info: &HashInfo, path: &str) -> Result<(), CredentialError> {
    let algo: HashAlgorithm = info.kind.parse()?;
    if algo.is_well_formed(&info.value) {
        Ok(())
    } else {
        Err(CredentialError::MalformedHex { path: path.to_string(), value: info.value.clone() })
    }
}

fn parse_hash(node: Node<'_, '_>, path: &str) -> Result<HashInfo, CredentialError> {
    let mut c = Children::of(node, path)?;
    let info = HashInfo { value: c.text_of("value")?, issuer: c.text_of("issuer")?, kind: c.text_of("type")? };
    c.finish()?;
    check_hash(&info, &format!("{path}/value"))?;
    Ok(info)
}

fn parse_p(node: Node<'_, '_>, path: &str) -> Result<PropertyEntry, CredentialError> {
    let mut text = String::new();
    let mut value = None;
    for child in node.children() {
        match child.node_type() {
            NodeType::Text => {
                let t = child.text().unwrap_or("");
                if value.is_some() {
                    if !t.trim().is_empty() {
                        return Err(schema(path, "text after <v>"));
                    }
                } else {
                    text.push_str(t);
                }
            }
            NodeType::Element if child.tag_name().name() == "v" && value.is_none() => {
                xml::no_attributes(child, &format!("{path}/v"))?;
                let v = leaf_text(child, &format!("{path}/v"))?;
                if v.parse::<f64>().is_err() {
                    return Err(schema(&format!("{path}/v"), format!("value `{v}` is not numeric")));
                }
                value = Some(v);
            }
            NodeType::Element => {
                return Err(schema(&format!("{}/{}", path, child.tag_name().name()), "unknown element"))
            }
            NodeType::Comment => {}
            _ => return Err(schema(path, "unexpected node")),
        }
    }
    let text = text.trim().to_string();
    if text.is_empty() {
        return Err(schema(path, "empty property"));
    }
    Ok(PropertyEntry { text, value })
}

fn parse_property_list(node: Node<'_, '_>, path: &str) -> Result<Vec<PropertyEntry>, CredentialError> {
    let mut c = Children::of(node, path)?;
    let mut out = Vec::new();
    while c.peek_is("p") {
        let p = c.expect("p")?;
        out.push(parse_p(p, &format!("{path}/p"))?);
    }
    c.finish()?;
    Ok(out)
}

/// Parses a certificate document, enforcing the element layout exactly.
pub fn parse_certificate(document: &[u8]) -> Result<PropertyCertificate, CredentialError> {
    let text = xml::parse_document(document)?;
    let doc = xml::parse_tree(&text)?;
    let root = doc.root_element();
    if root.tag_name().name() != "vnfCertificate" {
        return Err(schema(root.tag_name().name(), "expected <vnfCertificate>"));
    }
    xml::no_attributes(root, "vnfCertificate")?;
    let mut top = Children::of(root, "vnfCertificate")?;

    let node = top.expect("certificateInfo")?;
    let mut c = Children::of(node, "vnfCertificate/certificateInfo")?;
    let id = c.text_of("id")?;
    let issuer = c.text_of("issuer")?;
    let issuer_key = c.text_of("issuerKey")?;
    let sign_algo = c.text_of("signAlgo")?;
    let digital_sign = c.text_of("digitalSign")?;
    let vnode = c.expect_with_attributes("validity")?;
    let vpath = "vnfCertificate/certificateInfo/validity";
    let mut validity: Validity = leaf_text(vnode, vpath)?.parse()?;
    for attr in vnode.attributes() {
        match attr.name() {
            "issued" => {
                validity.issued_at = Some(
                    attr.value()
                        .parse()
                        .map_err(|_| CredentialError::Validity(format!("issued=\"{}\"", attr.value())))?,
                )
            }
            other => return Err(schema(vpath, format!("unknown attribute `{other}`"))),
        }
    }
    c.finish()?;
    let info = CertificateInfo { id, issuer, issuer_key, sign_algo, digital_sign, validity };

    let node = top.expect("vnfInfo")?;
    let path = "vnfCertificate/vnfInfo";
    let mut c = Children::of(node, path)?;
    let id = c.text_of("id")?;
    let name = c.text_of("vnfName")?;
    let make = c.text_of("vnfMake")?;
    let purpose = c.text_of("vnfPurpose")?;
    let map = c.expect("vnfMap")?;
    c.finish()?;
    let mpath = format!("{path}/vnfMap");
    let mut m = Children::of(map, &mpath)?;
    let mut vnf_map = Vec::new();
    while m.peek_is("serviceVMinfo") {
        let s = m.expect("serviceVMinfo")?;
        let mut sc = Children::of(s, &format!("{mpath}/serviceVMinfo"))?;
        vnf_map.push(ServiceVmInfo {
            vmid: sc.text_of("vmid")?,
            vm_name: sc.text_of("vmName")?,
            vim_location: sc.text_of("vimLocation")?,
        });
        sc.finish()?;
    }
    m.finish()?;
    if vnf_map.is_empty() {
        return Err(schema(&mpath, "missing <serviceVMinfo>"));
    }
    let vnf = VnfInfo { id, name, make, purpose, vnf_map };

    let node = top.expect("staticProperty")?;
    let path = "vnfCertificate/staticProperty";
    let mut c = Children::of(node, path)?;
    let vnf_hash = parse_hash(c.expect("vnfHashinfo")?, &format!("{path}/vnfHashinfo"))?;
    let service_vm_hash = parse_hash(c.expect("serviceVMHashinfo")?, &format!("{path}/serviceVMHashinfo"))?;
    c.finish()?;
    let static_props = StaticProperties { vnf_hash, service_vm_hash };

    let node = top.expect("dynamicProperty")?;
    let path = "vnfCertificate/dynamicProperty";
    let mut c = Children::of(node, path)?;
    let mut dynamic_props = DynamicProperties::default();
    if let Some(n) = c.optional("vnfProperty")? {
        dynamic_props.vnf = parse_property_list(n, &format!("{path}/vnfProperty"))?;
    }
    if let Some(n) = c.optional("serviceVMProperty")? {
        dynamic_props.service_vm = parse_property_list(n, &format!("{path}/serviceVMProperty"))?;
    }
    c.finish()?;
    top.finish()?;

    if info.validity.duration_secs() == 0 {
        return Err(CredentialError::Validity(info.validity.to_string()));
    }
    Ok(PropertyCertificate { info, vnf, static_props, dynamic_props })
}

impl PropertyCertificate {
    fn write(&self, w: &mut Writer, with_signature: bool) {
        w.open("vnfCertificate");
        w.open("certificateInfo");
        w.leaf("id", &self.info.id);
        w.leaf("issuer", &self.info.issuer);
        w.leaf("issuerKey", &self.info.issuer_key);
        w.leaf("signAlgo", &self.info.sign_algo);
        if with_signature {
            w.leaf("digitalSign", &self.info.digital_sign);
        }
        let attrs: Vec<(&str, String)> =
            self.info.validity.issued_at.map(|t| ("issued", t.to_string())).into_iter().collect();
        w.leaf_with("validity", &attrs, &self.info.validity.to_string());
        w.close("certificateInfo");

        w.open("vnfInfo");
        w.leaf("id", &self.vnf.id);
        w.leaf("vnfName", &self.vnf.name);
        w.leaf("vnfMake", &self.vnf.make);
        w.leaf("vnfPurpose", &self.vnf.purpose);
        w.open("vnfMap");
        for vm in &self.vnf.vnf_map {
            w.open("serviceVMinfo");
            w.leaf("vmid", &vm.vmid);
            w.leaf("vmName", &vm.vm_name);
            w.leaf("vimLocation", &vm.vim_location);
            w.close("serviceVMinfo");
        }
        w.close("vnfMap");
        w.close("vnfInfo");

        w.open("staticProperty");
        for (name, h) in [("vnfHashinfo", &self.static_props.vnf_hash), ("serviceVMHashinfo", &self.static_props.service_vm_hash)] {
            w.open(name);
            w.leaf("value", &h.value);
            w.leaf("issuer", &h.issuer);
            w.leaf("type", &h.kind);
            w.close(name);
        }
        w.close("staticProperty");

        if self.dynamic_props.is_empty() {
            w.empty("dynamicProperty");
        } else {
            w.open("dynamicProperty");
            for (name, list) in [("vnfProperty", &self.dynamic_props.vnf), ("serviceVMProperty", &self.dynamic_props.service_vm)] {
                if list.is_empty() {
                    w.empty(name);
                    continue;
                }
                w.open(name);
                for p in list {
                    match &p.value {
                        Some(v) => w.mixed("p", &p.text, "v", v),
                        None => w.leaf("p", &p.text),
                    }
                }
                w.close(name);
            }
            w.close("dynamicProperty");
        }
        w.close("vnfCertificate");
    }

    /// Canonical document: tab-indented, trimmed text, declaration first.
    pub fn to_xml(&self) -> String {
        let mut w = Writer::pretty("\t");
        self.write(&mut w, true);
        w.finish()
    }

    /// Bytes covered by the signature: schema order, trimmed text, no
    /// insignificant whitespace, `digitalSign` omitted.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::compact();
        self.write(&mut w, false);
        w.finish().into_bytes()
    }

    pub fn is_valid_at(&self, now: u64) -> bool {
        self.info.validity.covers(now)
    }

    /// Checks the signature and reports why it failed.
    pub fn check_signature(&self, key: &PublicKey) -> Result<(), CredentialError> {
        if self.info.sign_algo != SIGN_ALGO {
            return Err(super::signing::KeyError::AlgorithmMismatch { declared: self.info.sign_algo.clone() }.into());
        }
        let sig = Signature::from_hex(&self.info.digital_sign)?;
        if key.verify(&self.signing_bytes(), &sig) {
            Ok(())
        } else {
            Err(CredentialError::BadSignature)
        }
    }
}

/// Signs a certificate over its canonical bytes. The issuer key field is
/// set to the signer's public key before signing.
pub fn canonicalize_and_sign(mut cert: PropertyCertificate, key: &KeyPair) -> Result<PropertyCertificate, CredentialError> {
    if cert.info.sign_algo != key.algorithm() {
        return Err(super::signing::KeyError::AlgorithmMismatch { declared: cert.info.sign_algo.clone() }.into());
    }
    check_hash(&cert.static_props.vnf_hash, "staticProperty/vnfHashinfo/value")?;
    check_hash(&cert.static_props.service_vm_hash, "staticProperty/serviceVMHashinfo/value")?;
    cert.info.issuer_key = key.public().to_issuer_key();
    cert.info.digital_sign = String::new();
    let sig = key.sign(&cert.signing_bytes());
    cert.info.digital_sign = sig.to_hex();
    Ok(cert)
}

pub fn verify_signature(cert: &PropertyCertificate, key: &PublicKey) -> bool {
    cert.check_signature(key).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credentials::samples::LISTING_CERTIFICATE;

    #[test]
    fn listing_parses() {
        let cert = parse_certificate(LISTING_CERTIFICATE.as_bytes()).unwrap();
        assert_eq!(cert.info.id, "00001");
        assert_eq!(cert.info.sign_algo, "ECDSA");
        assert_eq!(cert.info.validity, Validity::hours(24));
        assert_eq!(cert.vnf.id, "022RV");
        assert_eq!(cert.vnf.name, "router");
        assert_eq!(cert.vnf.vnf_map[0].vmid, "D1X022RV");
        assert_eq!(cert.vnf.vnf_map[0].vim_location, "\"link\"");
        assert_eq!(
            cert.static_props.vnf_hash.value,
            "1a0f21437fc619acc51a81d552e9af77562263f7589f72752ac492caac9f7ed5"
        );
        assert_eq!(cert.dynamic_props.vnf.len(), 3);
        assert_eq!(cert.dynamic_props.vnf[2].text, "\"No Extra Service Running \"");
        assert_eq!(
            cert.dynamic_props.service_vm[0],
            PropertyEntry::with_value("\"Trusted Processes are Running \"", "10")
        );
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let cert = parse_certificate(LISTING_CERTIFICATE.as_bytes()).unwrap();
        let canonical = cert.to_xml();
        let again = parse_certificate(canonical.as_bytes()).unwrap();
        assert_eq!(again, cert);
        assert_eq!(again.to_xml(), canonical);
    }

    #[test]
    fn unknown_elements_are_rejected() {
        let doc = LISTING_CERTIFICATE.replace("<vnfMake>OF</vnfMake>", "<vnfMake>OF</vnfMake><color>red</color>");
        let err = parse_certificate(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("color"), "{err}");
        let doc = LISTING_CERTIFICATE.replace("<id>022RV</id>", "<id x=\"1\">022RV</id>");
        assert!(parse_certificate(doc.as_bytes()).is_err());
    }

    #[test]
    fn malformed_hex_and_validity() {
        let doc = LISTING_CERTIFICATE.replace("1a0f2143", "1a0f214Z");
        assert!(matches!(parse_certificate(doc.as_bytes()), Err(CredentialError::MalformedHex { .. })));
        let doc = LISTING_CERTIFICATE.replace("24hr", "24 fortnights");
        assert!(matches!(parse_certificate(doc.as_bytes()), Err(CredentialError::Validity(_))));
        let doc = LISTING_CERTIFICATE.replace("24hr", "0hr");
        assert!(matches!(parse_certificate(doc.as_bytes()), Err(CredentialError::Validity(_))));
    }

    #[test]
    fn sign_and_verify() {
        let key = KeyPair::from_seed(11);
        let cert = parse_certificate(LISTING_CERTIFICATE.as_bytes()).unwrap();
        let signed = canonicalize_and_sign(cert, &key).unwrap();
        assert!(verify_signature(&signed, &key.public()));
        assert!(!verify_signature(&signed, &KeyPair::from_seed(12).public()));

        let mut tampered = signed.clone();
        tampered.dynamic_props.vnf[0].text = "\"No Malware!\"".into();
        assert!(!verify_signature(&tampered, &key.public()));

        let reparsed = parse_certificate(signed.to_xml().as_bytes()).unwrap();
        assert!(verify_signature(&reparsed, &key.public()));
    }

    #[test]
    fn listing_signature_is_a_placeholder() {
        // The sample's digitalSign is 32 bytes, not an ECDSA signature.
        let cert = parse_certificate(LISTING_CERTIFICATE.as_bytes()).unwrap();
        let key = PublicKey::from_issuer_key(&cert.info.issuer_key).unwrap();
        assert!(!verify_signature(&cert, &key));
    }

    #[test]
    fn algorithm_mismatch() {
        let key = KeyPair::from_seed(2);
        let mut cert = parse_certificate(LISTING_CERTIFICATE.as_bytes()).unwrap();
        cert.info.sign_algo = "RSA".into();
        assert!(matches!(canonicalize_and_sign(cert, &key), Err(CredentialError::Key(_))));
    }

    #[test]
    fn validity_window() {
        let v = Validity { amount: 24, unit: DurationUnit::Hours, issued_at: Some(1000) };
        assert!(v.covers(1000));
        assert!(v.covers(1000 + 86_399));
        assert!(!v.covers(1000 + 86_400));
        assert!(!v.covers(999));
        assert_eq!("30min".parse::<Validity>().unwrap().duration_secs(), 1800);
    }
}
