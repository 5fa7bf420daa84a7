use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::morphometrics::FeatureVector;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "CADAS_CACHE_DIR";

/// Feature vectors keyed by config fingerprint, SEP id and input bytes.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$CADAS_CACHE_DIR` when set, otherwise `fallback`.
    pub fn from_env(fallback: &Path) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Self::new(d),
            _ => Self::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(fingerprint: &str, sep_id: &str, image: &[u8], annotation: &[u8]) -> String {
        let mut h = Sha256::new();
        for part in [fingerprint.as_bytes(), sep_id.as_bytes()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        h.update(Sha256::digest(image));
        h.update(Sha256::digest(annotation));
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A missing or unreadable entry is a miss.
    pub fn get(&self, key: &str) -> Option<FeatureVector<f64>> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Best effort; failing to cache never fails the entry.
    pub fn put(&self, key: &str, fv: &FeatureVector<f64>) {
        let Ok(json) = serde_json::to_string(fv) else { return };
        if std::fs::create_dir_all(&self.dir).is_err() {
            return;
        }
        let tmp = self.dir.join(format!("{key}.{}.tmp", std::process::id()));
        if std::fs::write(&tmp, json).is_ok() && std::fs::rename(&tmp, self.path(key)).is_err() {
            let _ = std::fs::remove_file(&tmp);
        }
    }
}
