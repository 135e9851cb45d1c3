//! Credential documents exchanged between the authority, the policy
//! repository and the trust manager: property attestation certificates,
//! trust policies and hashed digest reports.

mod certificate;
mod digest;
mod policy;
mod property;
mod signing;
pub(crate) mod xml;

use std::fmt;
use std::str::FromStr;

use sha2::{Digest as _, Sha256};

pub use certificate::{
    canonicalize_and_sign, parse_certificate, verify_signature, CertificateInfo, DurationUnit, DynamicProperties,
    HashInfo, PropertyCertificate, PropertyEntry, ServiceVmInfo, StaticProperties, Validity, VnfInfo,
};
pub use digest::{DigestEntry, DigestReport, Measurement};
pub use policy::{parse_policy, PolicyInfo, PolicyRule, PolicyVerdict, Requirements, TrustPolicy, ANY_NETWORK_SLICE};
pub use property::{property_string_to_constant, Collision, PropertyError, PropertyVocabulary};
pub use signing::{KeyError, KeyPair, PublicKey, Signature, SIGN_ALGO};

/// The sample documents the formats were modelled on.
pub mod samples {
    pub const LISTING_CERTIFICATE: &str = include_str!("../../data/sample_certificate.xml");
    pub const LISTING_POLICY: &str = include_str!("../../data/sample_policy.xml");
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CredentialError {
    #[error("document is not UTF-8: {0}")]
    Encoding(String),
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("schema violation at {path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("malformed hex at {path}: `{value}`")]
    MalformedHex { path: String, value: String },
    #[error("unparsable validity `{0}`")]
    Validity(String),
    #[error("unsupported hash algorithm `{0}`")]
    UnsupportedAlgorithm(String),
    #[error("rule {rule} has an empty condition")]
    EmptyCondition { rule: usize },
    #[error("policy has no rules")]
    NoRules,
    #[error("unknown verdict label `{0}`")]
    UnknownVerdict(String),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("signature does not verify")]
    BadSignature,
    #[error("certificate expired")]
    Expired,
    #[error("digest report line {line}: {detail}")]
    Digest { line: usize, detail: String },
    #[error("duplicate component `{0}` in digest report")]
    DuplicateComponent(String),
    #[error("component `{component}` names unknown parent `{parent}`")]
    UnknownParent { component: String, parent: String },
    #[error(transparent)]
    Property(#[from] PropertyError),
}

/// Digest algorithms accepted for measurements and certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum HashAlgorithm {
    /// Written `SHA2` in documents.
    Sha256,
}

impl HashAlgorithm {
    pub fn label(self) -> &'static str {
        match self {
            HashAlgorithm::Sha256 => "SHA2",
        }
    }

    pub fn hex_len(self) -> usize {
        match self {
            HashAlgorithm::Sha256 => 64,
        }
    }

    /// Lowercase hex digest of `bytes`.
    pub fn digest(self, bytes: &[u8]) -> String {
        match self {
            HashAlgorithm::Sha256 => hex::encode(Sha256::digest(bytes)),
        }
    }

    /// True for lowercase hex of the right length.
    pub fn is_well_formed(self, hex: &str) -> bool {
        hex.len() == self.hex_len() && hex.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for HashAlgorithm {
    type Err = CredentialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SHA2" | "SHA256" | "SHA-256" => Ok(HashAlgorithm::Sha256),
            other => Err(CredentialError::UnsupportedAlgorithm(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_labels() {
        assert_eq!("SHA2".parse::<HashAlgorithm>().unwrap(), HashAlgorithm::Sha256);
        assert!(matches!("SHA1".parse::<HashAlgorithm>(), Err(CredentialError::UnsupportedAlgorithm(_))));
        let d = HashAlgorithm::Sha256.digest(b"abc");
        assert_eq!(d, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert!(HashAlgorithm::Sha256.is_well_formed(&d));
        assert!(!HashAlgorithm::Sha256.is_well_formed(&d.to_uppercase()));
    }
}
