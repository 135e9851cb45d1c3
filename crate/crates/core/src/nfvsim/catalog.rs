//! Images the simulated VIM can boot, with their expected services.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::authority::StaticInfo;
use crate::credentials::HashAlgorithm;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Image {
    pub name: String,
    pub make: String,
    /// The artifact bytes the digest is computed over.
    pub content: String,
    pub services: Vec<String>,
    pub endpoints: Vec<String>,
    pub build: BTreeMap<String, String>,
}

impl Image {
    pub fn digest(&self) -> String {
        HashAlgorithm::Sha256.digest(self.content.as_bytes())
    }

    /// Static information for an artifact of this image, measured over
    /// `content` (which differs from the image's own if tampered).
    pub fn static_info(&self, content: &str) -> StaticInfo {
        StaticInfo {
            image: self.name.clone(),
            algorithm: HashAlgorithm::Sha256,
            digest: HashAlgorithm::Sha256.digest(content.as_bytes()),
            services: self.services.clone(),
            endpoints: self.endpoints.clone(),
            build: self.build.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageCatalog {
    images: BTreeMap<String, Image>,
}

impl ImageCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// VNF packages and VM images for the demonstration slice. Artifact
    /// padding is drawn from `seed`.
    pub fn standard(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cat = ImageCatalog::new();
        let specs: [(&str, &str, &[&str], &[&str]); 4] = [
            ("router-pkg", "OF", &["routerd"], &["eth0:179"]),
            ("firewall-pkg", "ON", &["fwd"], &["eth0:443"]),
            ("ubuntu-22.04", "ubuntu", &["sshd", "bash"], &["eth0:22"]),
            ("debian-12", "debian", &["sshd", "sh"], &["eth0:22"]),
        ];
        for (name, make, services, endpoints) in specs {
            let padding: String = (0..64).map(|_| format!("{:02x}", rng.gen::<u8>())).collect();
            cat.insert(Image {
                name: name.into(),
                make: make.into(),
                content: format!("{name}\n{padding}\n"),
                services: services.iter().map(|s| s.to_string()).collect(),
                endpoints: endpoints.iter().map(|s| s.to_string()).collect(),
                build: BTreeMap::from([("builder".to_string(), make.to_string())]),
            });
        }
        cat
    }

    pub fn insert(&mut self, image: Image) {
        self.images.insert(image.name.clone(), image);
    }

    pub fn get(&self, name: &str) -> Option<&Image> {
        self.images.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Image> {
        self.images.get_mut(name)
    }

    pub fn images(&self) -> impl Iterator<Item = &Image> {
        self.images.values()
    }
}
