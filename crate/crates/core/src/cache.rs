//! Content-addressed response cache.
//!
//! One pretty-printed JSON file per entry, named `{digest}.json` under the
//! cache root. Writes go to a temp file in the same directory and are renamed
//! into place, so concurrent writers never expose a partial entry.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const CACHE_ENV: &str = "MATURITY_RATER_CACHE";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupted cache entry {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("refusing to store an empty response")]
    EmptyResponse,
}

impl CacheError {
    fn io(path: &Path, source: io::Error) -> Self {
        CacheError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

/// Everything that determines a model answer. Field order is the canonical
/// serialization order.
#[derive(Debug, Serialize)]
pub struct KeyMaterial<'a> {
    pub backend: &'a str,
    pub model_id: &'a str,
    pub temperature: f64,
    pub prompt: &'a str,
    pub image_digests: &'a [&'a str],
    pub max_tokens: u32,
}

impl CacheKey {
    pub fn compute(material: &KeyMaterial<'_>) -> Self {
        let canonical = serde_json::to_vec(material).expect("key material serializes");
        CacheKey(hex::encode(Sha256::digest(&canonical)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub response_text: String,
    pub model_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub request_summary: String,
}

impl CacheEntry {
    pub fn new(key: CacheKey, response_text: String, model_id: &str, summary: String) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            key,
            response_text,
            model_id: model_id.to_string(),
            created_at,
            request_summary: summary,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct CacheStore {
    root: PathBuf,
}

impl CacheStore {
    /// Open (and create if needed) a cache rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CacheError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.root.join(format!("{}.json", key.as_str()))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>, CacheError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CacheError::io(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| CacheError::Corrupt {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        if entry.key != *key || entry.response_text.is_empty() {
            return Err(CacheError::Corrupt {
                path,
                reason: "entry does not match its file name or is empty".into(),
            });
        }
        Ok(Some(entry))
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), CacheError> {
        if entry.response_text.is_empty() {
            return Err(CacheError::EmptyResponse);
        }
        let path = self.path_for(&entry.key);
        let mut body = serde_json::to_string_pretty(entry).expect("entry serializes");
        body.push('\n');
        let tmp = tempfile::Builder::new()
            .prefix(".tmp-")
            .suffix(".part")
            .tempfile_in(&self.root)
            .map_err(|e| CacheError::io(&self.root, e))?;
        fs::write(tmp.path(), body).map_err(|e| CacheError::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| CacheError::io(&path, e.error))?;
        Ok(())
    }

    fn entry_paths(&self) -> Result<Vec<PathBuf>, CacheError> {
        let mut out = Vec::new();
        for item in fs::read_dir(&self.root).map_err(|e| CacheError::io(&self.root, e))? {
            let item = item.map_err(|e| CacheError::io(&self.root, e))?;
            let path = item.path();
            if path.extension().is_some_and(|ext| ext == "json") {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn stats(&self) -> Result<CacheStats, CacheError> {
        let mut stats = CacheStats::default();
        for path in self.entry_paths()? {
            let meta = fs::metadata(&path).map_err(|e| CacheError::io(&path, e))?;
            stats.entries += 1;
            stats.bytes += meta.len();
        }
        Ok(stats)
    }

    /// Delete every entry; returns how many were removed.
    pub fn clear(&self) -> Result<usize, CacheError> {
        let paths = self.entry_paths()?;
        for path in &paths {
            fs::remove_file(path).map_err(|e| CacheError::io(path, e))?;
        }
        Ok(paths.len())
    }
}
