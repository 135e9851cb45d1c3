//! The simulated Trusted Authority: binary attestation against reference
//! digests and property attestation into signed certificates.

mod checkers;
mod reference;
mod snapshot;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

pub use checkers::{Checker, CheckerKind, CheckerSuite, Level, MALWARE_SIGNATURES};
pub use reference::{Reference, ReferenceStore};
pub use snapshot::{AttestationRequest, DynamicInfo, InfoSnapshot, Phase, StaticInfo, SubjectInfo};

use crate::credentials::{
    canonicalize_and_sign, CertificateInfo, CredentialError, DynamicProperties, HashAlgorithm, HashInfo, KeyPair,
    PropertyCertificate, PublicKey, ServiceVmInfo, StaticProperties, Validity, VnfInfo, SIGN_ALGO,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuthorityError {
    #[error("no reference for `{identity}` ({algorithm})")]
    MissingReference { identity: String, algorithm: HashAlgorithm },
    #[error("reference for `{identity}` already registered as {existing}")]
    ConflictingReference { identity: String, existing: String },
    #[error("malformed digest `{0}`")]
    MalformedDigest(String),
    #[error("bad identity `{0}`")]
    BadIdentity(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("snapshot phase and dynamic information disagree")]
    InconsistentSnapshot,
    #[error("reference store line {line} is malformed")]
    StoreFormat { line: usize },
    #[error("checker manifest line {line}: `{detail}`")]
    Manifest { line: usize, detail: String },
    #[error("signing failed: {0}")]
    Signing(String),
    #[error(transparent)]
    Credential(#[from] CredentialError),
}

/// Outcome of measuring an artifact against its reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryAttestation {
    pub measured: String,
    pub reference: String,
    pub matched: bool,
}

/// Measures an artifact and compares it with the stored reference.
pub fn binary_attest(
    store: &ReferenceStore,
    artifact: &[u8],
    identity: &str,
    algorithm: HashAlgorithm,
) -> Result<BinaryAttestation, AuthorityError> {
    let reference = store
        .get(identity, algorithm)
        .ok_or_else(|| AuthorityError::MissingReference { identity: identity.to_string(), algorithm })?;
    let measured = algorithm.digest(artifact);
    Ok(BinaryAttestation { matched: measured == reference.digest, measured, reference: reference.digest.clone() })
}

/// One authority for both the VNF and the VM layer.
pub struct TrustedAuthority {
    name: String,
    signer: Mutex<KeyPair>,
    public: PublicKey,
    references: RwLock<ReferenceStore>,
    suite: CheckerSuite,
    validity: Validity,
    serial: AtomicU64,
}

impl TrustedAuthority {
    pub fn new(name: impl Into<String>, key: KeyPair, references: ReferenceStore, suite: CheckerSuite) -> Self {
        let public = key.public();
        TrustedAuthority {
            name: name.into(),
            signer: Mutex::new(key),
            public,
            references: RwLock::new(references),
            suite,
            validity: Validity::hours(24),
            serial: AtomicU64::new(0),
        }
    }

    pub fn with_validity(mut self, validity: Validity) -> Self {
        self.validity = Validity { issued_at: None, ..validity };
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn suite(&self) -> &CheckerSuite {
        &self.suite
    }

    pub fn references(&self) -> ReferenceStore {
        self.references.read().expect("reference lock").clone()
    }

    pub fn register_reference(
        &self,
        identity: &str,
        digest: &str,
        algorithm: HashAlgorithm,
        issuer: &str,
    ) -> Result<(), AuthorityError> {
        self.references.write().expect("reference lock").register(identity, digest, algorithm, issuer)
    }

    pub fn binary_attest(
        &self,
        artifact: &[u8],
        identity: &str,
        algorithm: HashAlgorithm,
    ) -> Result<BinaryAttestation, AuthorityError> {
        binary_attest(&self.references.read().expect("reference lock"), artifact, identity, algorithm)
    }

    /// Issues a signed certificate for the snapshot. Dynamic properties are
    /// those the checker suite affirms; pre-deployment requests get none.
    ///
    /// The subject is known if a reference exists for the VNF id, the VM id,
    /// or either image identity.
    pub fn property_attest(&self, request: &AttestationRequest) -> Result<PropertyCertificate, AuthorityError> {
        if !request.is_consistent() {
            return Err(AuthorityError::InconsistentSnapshot);
        }
        let s = &request.subject;
        let vm_issuer = {
            let refs = self.references.read().expect("reference lock");
            let known = [&s.vnf_id, &s.vm_id, &request.vnf_static.image, &request.vm_static.image];
            if !known.iter().any(|id| refs.knows(id)) {
                return Err(AuthorityError::UnknownSubject(s.vnf_id.clone()));
            }
            let algo = request.vm_static.algorithm;
            refs.get(&s.vm_id, algo).or_else(|| refs.get(&request.vm_static.image, algo)).map(|r| r.issuer.clone())
        };
        let mut dynamic_props = DynamicProperties::default();
        if request.phase == Phase::Active {
            if let Some(live) = request.dynamic() {
                let (vnf, vm) = self.suite.run(&request.vnf_static, &request.vm_static, live);
                dynamic_props = DynamicProperties { vnf, service_vm: vm };
            }
        }
        let serial = self.serial.fetch_add(1, Ordering::SeqCst) + 1;
        let cert = PropertyCertificate {
            info: CertificateInfo {
                id: format!("{serial:05}"),
                issuer: self.name.clone(),
                issuer_key: self.public.to_issuer_key(),
                sign_algo: SIGN_ALGO.to_string(),
                digital_sign: String::new(),
                validity: Validity { issued_at: Some(request.captured_at), ..self.validity },
            },
            vnf: VnfInfo {
                id: s.vnf_id.clone(),
                name: s.vnf_name.clone(),
                make: s.vnf_make.clone(),
                purpose: s.vnf_purpose.clone(),
                vnf_map: vec![ServiceVmInfo {
                    vmid: s.vm_id.clone(),
                    vm_name: s.vm_name.clone(),
                    vim_location: s.vim_location.clone(),
                }],
            },
            static_props: StaticProperties {
                vnf_hash: HashInfo {
                    value: request.vnf_static.digest.clone(),
                    issuer: s.vnf_make.clone(),
                    kind: request.vnf_static.algorithm.label().to_string(),
                },
                service_vm_hash: HashInfo {
                    value: request.vm_static.digest.clone(),
                    issuer: vm_issuer.unwrap_or_else(|| self.name.clone()),
                    kind: request.vm_static.algorithm.label().to_string(),
                },
            },
            dynamic_props,
        };
        let signer = self.signer.lock().map_err(|e| AuthorityError::Signing(e.to_string()))?;
        Ok(canonicalize_and_sign(cert, &signer)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credentials::verify_signature;

    fn ta() -> TrustedAuthority {
        let mut refs = ReferenceStore::new();
        refs.register("vnf3", &HashAlgorithm::Sha256.digest(b"router-pkg"), HashAlgorithm::Sha256, "OF").unwrap();
        refs.register("vm3", &HashAlgorithm::Sha256.digest(b"ubuntu-img"), HashAlgorithm::Sha256, "ubuntu").unwrap();
        TrustedAuthority::new("TA", KeyPair::from_seed(1), refs, CheckerSuite::default())
    }

    fn stat(bytes: &[u8], services: &[&str]) -> StaticInfo {
        StaticInfo {
            image: String::from_utf8_lossy(bytes).into_owned(),
            algorithm: HashAlgorithm::Sha256,
            digest: HashAlgorithm::Sha256.digest(bytes),
            services: services.iter().map(|s| s.to_string()).collect(),
            endpoints: vec![],
            build: Default::default(),
        }
    }

    fn subject() -> SubjectInfo {
        SubjectInfo {
            vnf_id: "vnf3".into(),
            vnf_name: "router".into(),
            vnf_make: "OF".into(),
            vnf_purpose: "l2router".into(),
            vm_id: "vm3".into(),
            vm_name: "sakura".into(),
            vim_location: "dc1".into(),
        }
    }

    #[test]
    fn binary_attestation() {
        let ta = ta();
        let a = ta.binary_attest(b"router-pkg", "vnf3", HashAlgorithm::Sha256).unwrap();
        assert!(a.matched);
        assert_eq!(a, ta.binary_attest(b"router-pkg", "vnf3", HashAlgorithm::Sha256).unwrap());
        assert!(!ta.binary_attest(b"router-pkh", "vnf3", HashAlgorithm::Sha256).unwrap().matched);
        assert!(matches!(
            ta.binary_attest(b"x", "nobody", HashAlgorithm::Sha256),
            Err(AuthorityError::MissingReference { .. })
        ));
    }

    #[test]
    fn pre_deployment_certificates_have_no_dynamic_section() {
        let ta = ta();
        let snap = InfoSnapshot::pre_deployment(subject(), stat(b"router-pkg", &[]), stat(b"ubuntu-img", &[]), 7);
        let cert = ta.property_attest(&snap).unwrap();
        assert!(cert.dynamic_props.is_empty());
        assert!(verify_signature(&cert, ta.public_key()));
        assert_eq!(snap.dynamic_reads(), 0);
        assert_eq!(cert.info.validity.issued_at, Some(7));
    }

    #[test]
    fn active_certificates_carry_affirmed_properties() {
        let ta = ta();
        let live = DynamicInfo {
            processes: vec!["routerd".into()],
            memory_integrity: true,
            address_randomisation: true,
            open_endpoints: vec![],
            shells: vec![],
        };
        let snap = InfoSnapshot::active(subject(), stat(b"router-pkg", &["routerd"]), stat(b"ubuntu-img", &[]), live, 9);
        let cert = ta.property_attest(&snap).unwrap();
        let texts: Vec<&str> = cert.dynamic_props.vnf.iter().map(|p| p.text.as_str()).collect();
        assert_eq!(texts, ["No Malware", "Memory Integrity ok", "No Extra Service Running"]);
        assert!(verify_signature(&cert, ta.public_key()));
        let mut unknown = subject();
        unknown.vnf_id = "ghost".into();
        unknown.vm_id = "ghost-vm".into();
        let snap = InfoSnapshot::pre_deployment(unknown, stat(b"a", &[]), stat(b"b", &[]), 0);
        assert!(matches!(ta.property_attest(&snap), Err(AuthorityError::UnknownSubject(_))));
    }
}
