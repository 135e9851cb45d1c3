//! Reference digests supplied by manufacturers.
//!
//! Persisted one reference per line, tab separated:
//! `identity algorithm digest issuer`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AuthorityError;
use crate::credentials::HashAlgorithm;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub digest: String,
    pub issuer: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceStore {
    refs: BTreeMap<(String, HashAlgorithm), Reference>,
}

impl ReferenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a reference. Re-registering the same digest is a no-op; a
    /// different digest for the same identity and algorithm is rejected.
    pub fn register(
        &mut self,
        identity: &str,
        digest: &str,
        algorithm: HashAlgorithm,
        issuer: &str,
    ) -> Result<(), AuthorityError> {
        let digest = digest.trim().to_ascii_lowercase();
        if identity.is_empty() || identity.contains(char::is_whitespace) {
            return Err(AuthorityError::BadIdentity(identity.to_string()));
        }
        if !algorithm.is_well_formed(&digest) {
            return Err(AuthorityError::MalformedDigest(digest));
        }
        let key = (identity.to_string(), algorithm);
        match self.refs.get(&key) {
            Some(existing) if existing.digest == digest => Ok(()),
            Some(existing) => Err(AuthorityError::ConflictingReference {
                identity: identity.to_string(),
                existing: existing.digest.clone(),
            }),
            None => {
                self.refs.insert(key, Reference { digest, issuer: issuer.trim().to_string() });
                Ok(())
            }
        }
    }

    pub fn get(&self, identity: &str, algorithm: HashAlgorithm) -> Option<&Reference> {
        self.refs.get(&(identity.to_string(), algorithm))
    }

    pub fn knows(&self, identity: &str) -> bool {
        self.refs.keys().any(|(id, _)| id == identity)
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ((id, algo), r) in &self.refs {
            out.push_str(&format!("{id}\t{algo}\t{}\t{}\n", r.digest, r.issuer));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AuthorityError> {
        let mut store = ReferenceStore::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, algo, digest, issuer] = fields.as_slice() else {
                return Err(AuthorityError::StoreFormat { line: i + 1 });
            };
            let algo: HashAlgorithm = algo.parse()?;
            store.register(id, digest, algo, issuer)?;
        }
        Ok(store)
    }
}
