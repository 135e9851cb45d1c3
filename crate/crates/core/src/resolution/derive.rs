//! Facts from digest reports and property certificates.

use std::collections::BTreeSet;

use super::{FactBase, Provenance};
use crate::credentials::{
    Collision, DigestReport, PropertyCertificate, PropertyEntry, PropertyError, PropertyVocabulary, PublicKey,
};
use crate::lopat::Literal;

/// Slice membership, containment and measurement facts of a report.
///
/// Top-level components yield `HasNS(slice, c)`, nested ones
/// `HasC(parent, c)`, and each measurement `SatC(c, hash_<digest>)`.
pub fn derive_facts_from_digest_report(report: &DigestReport) -> FactBase {
    let mut fb = FactBase::new();
    let mut add = |l: Literal| {
        fb.insert(l, Provenance::DigestReport).expect("report facts are ground");
    };
    for c in &report.components {
        match &c.parent {
            None => add(Literal::has_ns(&report.slice, &c.id)),
            Some(p) => add(Literal::has_c(p, &c.id)),
        }
        if let Some(m) = &c.measurement {
            add(Literal::sat_c(&c.id, &format!("hash_{}", m.digest)));
        }
    }
    fb
}

fn push_property(
    out: &mut Vec<Literal>,
    vocab: &mut PropertyVocabulary,
    collisions: &mut Vec<Collision>,
    subject: &str,
    p: &PropertyEntry,
) -> Result<(), PropertyError> {
    let (stem, c) = vocab.intern(&p.text, None)?;
    collisions.extend(c);
    out.push(Literal::sat_c(subject, &stem.name));
    if let Some(v) = &p.value {
        let (valued, c) = vocab.intern(&p.text, Some(v))?;
        collisions.extend(c);
        out.push(Literal::sat_c(subject, &valued.name));
    }
    Ok(())
}

/// The SatC facts a certificate attests, without any checks.
///
/// The VNF's hash and VNF properties are attributed to the VNF id; the
/// service-VM hash and properties to every VM in the map. A valued property
/// yields both the bare constant and the `_<value>` constant.
pub fn certificate_facts(
    cert: &PropertyCertificate,
    vocab: &mut PropertyVocabulary,
) -> Result<(Vec<Literal>, Vec<Collision>), PropertyError> {
    let mut out = Vec::new();
    let mut collisions = Vec::new();
    let vnf = &cert.vnf.id;
    out.push(Literal::sat_c(vnf, &format!("hash_{}", cert.static_props.vnf_hash.value)));
    for vm in &cert.vnf.vnf_map {
        out.push(Literal::sat_c(&vm.vmid, &format!("hash_{}", cert.static_props.service_vm_hash.value)));
    }
    for p in &cert.dynamic_props.vnf {
        push_property(&mut out, vocab, &mut collisions, vnf, p)?;
    }
    for vm in &cert.vnf.vnf_map {
        for p in &cert.dynamic_props.service_vm {
            push_property(&mut out, vocab, &mut collisions, &vm.vmid, p)?;
        }
    }
    Ok((out, collisions))
}

/// What a certificate must pass before its facts are used.
#[derive(Debug, Clone, Copy)]
pub struct CertificateCheck<'a> {
    pub key: &'a PublicKey,
    /// Unix seconds.
    pub now: u64,
    /// VNF ids the caller expects; `None` accepts any.
    pub known_subjects: Option<&'a BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    Expired,
    Signature(String),
    UnknownSubject,
    Property(PropertyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedCertificate {
    pub certificate_id: String,
    pub subject: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default)]
pub struct CertDerivation {
    pub facts: FactBase,
    pub skipped: Vec<SkippedCertificate>,
    pub collisions: Vec<Collision>,
}

/// Facts from every certificate that verifies, is within its validity
/// window and names a known subject. Rejected certificates are reported and
/// the rest processed.
pub fn derive_facts_from_property_certs(certs: &[PropertyCertificate], check: &CertificateCheck<'_>) -> CertDerivation {
    let mut out = CertDerivation::default();
    let mut vocab = PropertyVocabulary::new();
    for cert in certs {
        let skip = |reason| SkippedCertificate {
            certificate_id: cert.info.id.clone(),
            subject: cert.vnf.id.clone(),
            reason,
        };
        if let Some(known) = check.known_subjects {
            if !known.contains(&cert.vnf.id) {
                out.skipped.push(skip(SkipReason::UnknownSubject));
                continue;
            }
        }
        if let Err(e) = cert.check_signature(check.key) {
            out.skipped.push(skip(SkipReason::Signature(e.to_string())));
            continue;
        }
        if !cert.is_valid_at(check.now) {
            out.skipped.push(skip(SkipReason::Expired));
            continue;
        }
        match certificate_facts(cert, &mut vocab) {
            Ok((facts, collisions)) => {
                for f in facts {
                    out.facts.insert(f, Provenance::PropertyCertificate).expect("certificate facts are ground");
                }
                out.collisions.extend(collisions);
            }
            Err(e) => out.skipped.push(skip(SkipReason::Property(e))),
        }
    }
    out
}
