//! Append-only versioned object storage.
//!
//! Objects live at `root/<bucket>/<key>/<versionId>`; each bucket keeps an
//! append-only `.index.jsonl` with one [`ObjectVersion`] per line, which is
//! replayed on open. Version ids are monotonic ULIDs, so lexical order is
//! creation order.

pub mod client;
pub mod server;
pub mod sign;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use ulid::{Generator, Ulid};

use crate::schemas::{sha256_hex, timestamp_now};

pub use client::{StoreClient, StoreClientError};
pub use server::{router, serve, StoreConfig, StoreServer};
pub use sign::{presign_url, Grant, GrantError, Method};

pub const MAX_KEY_LEN: usize = 512;
const INDEX_FILE: &str = ".index.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectVersion {
    pub bucket: String,
    pub key: String,
    pub version_id: String,
    pub size: u64,
    pub content_hash: String,
    pub created_at: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown bucket {0:?}")]
    UnknownBucket(String),
    #[error("invalid bucket name {0:?}")]
    InvalidBucket(String),
    #[error("invalid key {key:?}: {reason}")]
    InvalidKey { key: String, reason: &'static str },
    #[error("object {bucket}/{key} not found")]
    NotFound { bucket: String, key: String },
    #[error("version {version_id} of {bucket}/{key} not found")]
    VersionNotFound { bucket: String, key: String, version_id: String },
    #[error("object body must not be empty")]
    EmptyBody,
    #[error("storage full: quota of {quota} bytes exceeded")]
    StorageFull { quota: u64 },
    #[error("corrupt object {0}: content hash mismatch")]
    Corrupt(String),
    #[error("storage I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn validate_bucket(bucket: &str) -> Result<(), StoreError> {
    let ok = (1..=63).contains(&bucket.len())
        && bucket.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        && !bucket.starts_with('-');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidBucket(bucket.to_string()))
    }
}

/// Keys are `/`-separated segments of `[A-Za-z0-9._-]`; no segment may start
/// with `.` or look like a version id, and the last segment may not be
/// `versions` (reserved for version listing).
pub fn validate_key(key: &str) -> Result<(), StoreError> {
    let fail = |reason| Err(StoreError::InvalidKey { key: key.to_string(), reason });
    if key.is_empty() || key.len() > MAX_KEY_LEN {
        return fail("length must be 1..=512 bytes");
    }
    for seg in key.split('/') {
        if seg.is_empty() {
            return fail("empty path segment");
        }
        if seg.starts_with('.') {
            return fail("segments may not start with '.'");
        }
        if !seg.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-')) {
            return fail("segments may only contain A-Z a-z 0-9 . _ -");
        }
        if seg.len() == 26 && Ulid::from_string(seg).is_ok() {
            return fail("segments may not look like a version id");
        }
    }
    if key.rsplit('/').next() == Some("versions") {
        return fail("'versions' is reserved as the final segment");
    }
    Ok(())
}

type KeyIndex = BTreeMap<String, Vec<ObjectVersion>>;
type KeyLocks = HashMap<(String, String), Arc<Mutex<()>>>;

pub struct ObjectStore {
    root: PathBuf,
    quota: Option<u64>,
    index: RwLock<HashMap<String, KeyIndex>>,
    /// Serializes appends per (bucket, key).
    key_locks: Mutex<KeyLocks>,
    ids: Mutex<Generator>,
    used: Mutex<u64>,
}

impl ObjectStore {
    /// Opens (or initializes) a store rooted at `root`, replaying bucket indexes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut index = HashMap::new();
        let mut used = 0;
        for entry in fs::read_dir(&root)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !entry.file_type()?.is_dir() || validate_bucket(&name).is_err() {
                continue;
            }
            let mut keys: KeyIndex = BTreeMap::new();
            let path = entry.path().join(INDEX_FILE);
            if path.exists() {
                for line in fs::read_to_string(&path)?.lines().filter(|l| !l.trim().is_empty()) {
                    // A torn final line from a crash is skipped; its bytes were never acknowledged.
                    let Ok(v) = serde_json::from_str::<ObjectVersion>(line) else { continue };
                    used += v.size;
                    keys.entry(v.key.clone()).or_default().push(v);
                }
            }
            for versions in keys.values_mut() {
                versions.sort_by(|a, b| a.version_id.cmp(&b.version_id));
            }
            index.insert(name, keys);
        }
        Ok(Self {
            root,
            quota: None,
            index: RwLock::new(index),
            key_locks: Mutex::new(HashMap::new()),
            ids: Mutex::new(Generator::new()),
            used: Mutex::new(used),
        })
    }

    pub fn with_quota(mut self, bytes: u64) -> Self {
        self.quota = Some(bytes);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create_bucket(&self, bucket: &str) -> Result<(), StoreError> {
        validate_bucket(bucket)?;
        let mut index = self.index.write().expect("index lock");
        if !index.contains_key(bucket) {
            fs::create_dir_all(self.root.join(bucket))?;
            index.insert(bucket.to_string(), BTreeMap::new());
        }
        Ok(())
    }

    pub fn has_bucket(&self, bucket: &str) -> bool {
        self.index.read().expect("index lock").contains_key(bucket)
    }

    pub fn buckets(&self) -> Vec<String> {
        let mut b: Vec<String> = self.index.read().expect("index lock").keys().cloned().collect();
        b.sort();
        b
    }

    fn key_lock(&self, bucket: &str, key: &str) -> Arc<Mutex<()>> {
        let mut locks = self.key_locks.lock().expect("key lock table");
        locks.entry((bucket.to_string(), key.to_string())).or_default().clone()
    }

    fn next_version(&self, after: Option<&str>) -> String {
        let mut gen = self.ids.lock().expect("id generator");
        let mut id = gen.generate().unwrap_or_else(|_| Ulid::new());
        // Guards against clock steps backwards between restarts.
        if let Some(last) = after.and_then(|a| Ulid::from_string(a).ok()) {
            if id <= last {
                id = last.increment().unwrap_or(last);
            }
        }
        id.to_string()
    }

    /// Appends a new version. Prior versions are never touched.
    pub fn put_object(&self, bucket: &str, key: &str, bytes: &[u8]) -> Result<ObjectVersion, StoreError> {
        validate_key(key)?;
        if bytes.is_empty() {
            return Err(StoreError::EmptyBody);
        }
        if !self.has_bucket(bucket) {
            return Err(StoreError::UnknownBucket(bucket.to_string()));
        }
        {
            let mut used = self.used.lock().expect("usage counter");
            if let Some(quota) = self.quota {
                if *used + bytes.len() as u64 > quota {
                    return Err(StoreError::StorageFull { quota });
                }
            }
            *used += bytes.len() as u64;
        }
        let result = self.append(bucket, key, bytes);
        if result.is_err() {
            *self.used.lock().expect("usage counter") -= bytes.len() as u64;
        }
        result
    }

    fn append(&self, bucket: &str, key: &str, bytes: &[u8]) -> Result<ObjectVersion, StoreError> {
        let lock = self.key_lock(bucket, key);
        let _guard = lock.lock().expect("per-key lock");
        let last = self.latest(bucket, key).map(|v| v.version_id);
        let version_id = self.next_version(last.as_deref());

        let dir = self.root.join(bucket).join(key);
        fs::create_dir_all(&dir)?;
        let tmp = dir.join(format!(".tmp-{version_id}"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_data()?;
        }
        fs::rename(&tmp, dir.join(&version_id))?;

        let v = ObjectVersion {
            bucket: bucket.to_string(),
            key: key.to_string(),
            version_id,
            size: bytes.len() as u64,
            content_hash: sha256_hex(bytes),
            created_at: timestamp_now(),
        };
        let mut index = self.index.write().expect("index lock");
        let mut line = serde_json::to_string(&v).expect("version serializes");
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join(bucket).join(INDEX_FILE))?
            .write_all(line.as_bytes())?;
        index.get_mut(bucket).expect("bucket checked").entry(key.to_string()).or_default().push(v.clone());
        Ok(v)
    }

    fn latest(&self, bucket: &str, key: &str) -> Option<ObjectVersion> {
        let index = self.index.read().expect("index lock");
        index.get(bucket)?.get(key)?.last().cloned()
    }

    /// Resolves a version (latest when `version_id` is `None`).
    pub fn head_object(&self, bucket: &str, key: &str, version_id: Option<&str>) -> Result<ObjectVersion, StoreError> {
        let index = self.index.read().expect("index lock");
        let keys = index.get(bucket).ok_or_else(|| StoreError::UnknownBucket(bucket.to_string()))?;
        let not_found = || StoreError::NotFound { bucket: bucket.to_string(), key: key.to_string() };
        let versions = keys.get(key).ok_or_else(not_found)?;
        match version_id {
            None => versions.last().cloned().ok_or_else(not_found),
            Some(id) => {
                versions.iter().find(|v| v.version_id == id).cloned().ok_or_else(|| StoreError::VersionNotFound {
                    bucket: bucket.to_string(),
                    key: key.to_string(),
                    version_id: id.to_string(),
                })
            }
        }
    }

    pub fn get_object(
        &self,
        bucket: &str,
        key: &str,
        version_id: Option<&str>,
    ) -> Result<(ObjectVersion, Vec<u8>), StoreError> {
        let v = self.head_object(bucket, key, version_id)?;
        let bytes = fs::read(self.root.join(bucket).join(key).join(&v.version_id))?;
        if sha256_hex(&bytes) != v.content_hash {
            return Err(StoreError::Corrupt(format!("{bucket}/{key}@{}", v.version_id)));
        }
        Ok((v, bytes))
    }

    /// Versions of a key in creation order; empty for unknown keys.
    pub fn list_versions(&self, bucket: &str, key: &str) -> Result<Vec<ObjectVersion>, StoreError> {
        let index = self.index.read().expect("index lock");
        let keys = index.get(bucket).ok_or_else(|| StoreError::UnknownBucket(bucket.to_string()))?;
        Ok(keys.get(key).cloned().unwrap_or_default())
    }

    /// Keys in a bucket starting with `prefix`, sorted.
    pub fn list_keys(&self, bucket: &str, prefix: &str) -> Result<Vec<String>, StoreError> {
        let index = self.index.read().expect("index lock");
        let keys = index.get(bucket).ok_or_else(|| StoreError::UnknownBucket(bucket.to_string()))?;
        Ok(keys.keys().filter(|k| k.starts_with(prefix)).cloned().collect())
    }
}
