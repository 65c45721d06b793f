//! Content-addressed completion cache.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;

use super::backend::Completion;
use super::prompt::Role;

#[derive(Debug, Error)]
#[error("cache entry {path} is corrupt: {reason}")]
pub struct CacheCorrupt {
    pub path: PathBuf,
    pub reason: String,
}

pub fn cache_key(role: Role, prompt: &str, temperature: f64, backend_id: &str) -> String {
    let mut h = Sha256::new();
    for part in [role.as_str().as_bytes(), prompt.as_bytes(), backend_id.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update(temperature.to_bits().to_le_bytes());
    hex::encode(h.finalize())
}

/// In-memory map, optionally mirrored to `<dir>/<key>.json`.
#[derive(Debug, Default)]
pub struct CompletionCache {
    mem: RwLock<HashMap<String, Completion>>,
    dir: Option<PathBuf>,
}

impl CompletionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn persistent(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(CompletionCache {
            mem: RwLock::default(),
            dir: Some(dir),
        })
    }

    fn entry_path(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<Completion>, CacheCorrupt> {
        if let Some(hit) = self.mem.read().unwrap().get(key) {
            return Ok(Some(hit.clone()));
        }
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = Self::entry_path(dir, key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(CacheCorrupt {
                    path,
                    reason: e.to_string(),
                })
            }
        };
        let c: Completion = serde_json::from_slice(&bytes).map_err(|e| CacheCorrupt {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        self.mem.write().unwrap().insert(key.to_string(), c.clone());
        Ok(Some(c))
    }

    pub fn put(&self, key: &str, completion: &Completion) {
        self.mem.write().unwrap().insert(key.to_string(), completion.clone());
        if let Some(dir) = &self.dir {
            let path = Self::entry_path(dir, key);
            let tmp = path.with_extension("json.tmp");
            let written = serde_json::to_vec(completion)
                .map_err(std::io::Error::other)
                .and_then(|bytes| std::fs::write(&tmp, bytes))
                .and_then(|_| std::fs::rename(&tmp, &path));
            if let Err(e) = written {
                warn!(path = %path.display(), error = %e, "failed to persist cache entry");
            }
        }
    }
}
