//! ECDSA P-256 keys and signatures for the Trusted Authority.
//!
//! Public keys are carried in certificates as an OpenSSH
//! `ecdsa-sha2-nistp256` key blob in base64, wrapped in double quotes.
//! Key files use PEM (PKCS#8 for private keys, SPKI for public keys).

use base64::engine::general_purpose::{STANDARD_NO_PAD, STANDARD};
use base64::Engine as _;
use p256::ecdsa::signature::{Signer, Verifier};
use p256::ecdsa::{Signature as EcdsaSignature, SigningKey, VerifyingKey};
use p256::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePrivateKey, EncodePublicKey, LineEnding};
use rand::{CryptoRng, RngCore};

/// The `signAlgo` label this implementation signs and verifies.
pub const SIGN_ALGO: &str = "ECDSA";

const SSH_KEY_TYPE: &[u8] = b"ecdsa-sha2-nistp256";
const SSH_CURVE: &[u8] = b"nistp256";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("key decode failure: {0}")]
    Decode(String),
    #[error("signature algorithm {declared} does not match key algorithm {SIGN_ALGO}")]
    AlgorithmMismatch { declared: String },
    #[error("malformed signature: {0}")]
    Signature(String),
}

#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public().to_issuer_key()).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    verifying: VerifyingKey,
}

/// A detached signature; hex encoded as `r || s` in documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature(EcdsaSignature);

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        KeyPair { signing: SigningKey::random(rng) }
    }

    /// Deterministic key pair, for simulations and tests.
    pub fn from_seed(seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        Self::generate(&mut rng)
    }

    pub fn public(&self) -> PublicKey {
        PublicKey { verifying: *self.signing.verifying_key() }
    }

    pub fn algorithm(&self) -> &'static str {
        SIGN_ALGO
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message))
    }

    pub fn to_pem(&self) -> String {
        self.signing
            .to_pkcs8_pem(LineEnding::LF)
            .expect("P-256 key encodes as PKCS#8")
            .to_string()
    }

    pub fn from_pem(pem: &str) -> Result<Self, KeyError> {
        SigningKey::from_pkcs8_pem(pem)
            .map(|signing| KeyPair { signing })
            .map_err(|e| KeyError::Decode(e.to_string()))
    }
}

impl PublicKey {
    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        self.verifying.verify(message, &signature.0).is_ok()
    }

    pub fn to_pem(&self) -> String {
        self.verifying.to_public_key_pem(LineEnding::LF).expect("P-256 key encodes as SPKI")
    }

    pub fn from_pem(pem: &str) -> Result<Self, KeyError> {
        VerifyingKey::from_public_key_pem(pem)
            .map(|verifying| PublicKey { verifying })
            .map_err(|e| KeyError::Decode(e.to_string()))
    }

    /// OpenSSH wire-format blob, base64, in double quotes.
    pub fn to_issuer_key(&self) -> String {
        let point = self.verifying.to_encoded_point(false);
        let mut blob = Vec::with_capacity(104);
        for part in [SSH_KEY_TYPE, SSH_CURVE, point.as_bytes()] {
            blob.extend_from_slice(&(part.len() as u32).to_be_bytes());
            blob.extend_from_slice(part);
        }
        format!("\"{}\"", STANDARD_NO_PAD.encode(blob))
    }

    /// Accepts the quoted base64 blob, with or without padding; interior
    /// whitespace (line wrapping) is ignored.
    pub fn from_issuer_key(text: &str) -> Result<Self, KeyError> {
        let cleaned: String =
            text.chars().filter(|c| !c.is_whitespace() && *c != '"').collect();
        let blob = STANDARD
            .decode(&cleaned)
            .or_else(|_| STANDARD_NO_PAD.decode(cleaned.trim_end_matches('=')))
            .map_err(|e| KeyError::Decode(e.to_string()))?;
        let mut rest = blob.as_slice();
        let mut parts = Vec::new();
        while !rest.is_empty() {
            if rest.len() < 4 {
                return Err(KeyError::Decode("truncated key blob".into()));
            }
            let len = u32::from_be_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(KeyError::Decode("truncated key blob".into()));
            }
            parts.push(&rest[..len]);
            rest = &rest[len..];
        }
        match parts.as_slice() {
            [kind, curve, point] if *kind == SSH_KEY_TYPE && *curve == SSH_CURVE => {
                VerifyingKey::from_sec1_bytes(point)
                    .map(|verifying| PublicKey { verifying })
                    .map_err(|e| KeyError::Decode(e.to_string()))
            }
            _ => Err(KeyError::Decode("not an ecdsa-sha2-nistp256 key".into())),
        }
    }
}

impl Signature {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self, KeyError> {
        let bytes = hex::decode(text.trim()).map_err(|e| KeyError::Signature(e.to_string()))?;
        EcdsaSignature::from_slice(&bytes)
            .map(Signature)
            .map_err(|e| KeyError::Signature(e.to_string()))
    }
}
