//! Invocation cache keyed by content hash, with TTL validity.
//!
//! Expired entries are bypassed and lazily overwritten, never eagerly
//! deleted. Eviction beyond TTL (e.g. LRU) is an extension point.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::mcp::ContentItem;

/// Time-to-live for cached tool output. `Disabled` corresponds to ttl=0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ttl {
    Disabled,
    Seconds(u64),
    Infinite,
}

impl Ttl {
    pub fn from_seconds(seconds: u64) -> Ttl {
        if seconds == 0 {
            Ttl::Disabled
        } else {
            Ttl::Seconds(seconds)
        }
    }

    pub fn caching_enabled(&self) -> bool {
        !matches!(self, Ttl::Disabled)
    }
}

/// One cached tool output. Valid iff `now - created_at < ttl` (strict), with
/// infinite TTL always valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub payload: Vec<ContentItem>,
    /// Seconds since epoch (or virtual-clock seconds).
    pub created_at: u64,
    pub ttl: Ttl,
}

impl CacheEntry {
    pub fn is_valid_at(&self, now_s: u64) -> bool {
        match self.ttl {
            Ttl::Disabled => false,
            Ttl::Infinite => true,
            Ttl::Seconds(ttl) => now_s.saturating_sub(self.created_at) < ttl,
        }
    }
}

pub trait InvocationCache: Send + Sync {
    fn get(&self, key: &str) -> Option<CacheEntry>;
    /// Last write wins for concurrent writers to the same key.
    fn put(&self, entry: CacheEntry);
    fn list(&self) -> Vec<CacheEntry>;
    fn clear(&self);
}

#[derive(Default)]
pub struct MemoryCache {
    entries: Mutex<HashMap<String, CacheEntry>>,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }
}

impl InvocationCache for MemoryCache {
    fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    fn put(&self, entry: CacheEntry) {
        self.entries.lock().unwrap().insert(entry.key.clone(), entry);
    }

    fn list(&self) -> Vec<CacheEntry> {
        let mut all: Vec<CacheEntry> = self.entries.lock().unwrap().values().cloned().collect();
        all.sort_by(|a, b| a.key.cmp(&b.key));
        all
    }

    fn clear(&self) {
        self.entries.lock().unwrap().clear();
    }
}

/// Directory-backed cache, one JSON file per entry named by the cache key.
/// Mirrors the object-store layout used for blobs so `cache ls` / `cache
/// clear` can operate on runs that already exited.
pub struct DirCache {
    root: PathBuf,
}

impl DirCache {
    pub fn new(root: impl AsRef<Path>) -> Self {
        DirCache {
            root: root.as_ref().to_path_buf(),
        }
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(key)
    }
}

impl InvocationCache for DirCache {
    fn get(&self, key: &str) -> Option<CacheEntry> {
        // Reject anything that could escape the cache directory.
        if !key.chars().all(|c| c.is_ascii_hexdigit()) {
            return None;
        }
        let bytes = fs::read(self.path_for(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    fn put(&self, entry: CacheEntry) {
        if fs::create_dir_all(&self.root).is_err() {
            return;
        }
        let _ = fs::write(
            self.path_for(&entry.key),
            serde_json::to_vec(&entry).expect("cache entry serialization"),
        );
    }

    fn list(&self) -> Vec<CacheEntry> {
        let mut out = Vec::new();
        if let Ok(dir) = fs::read_dir(&self.root) {
            for item in dir.flatten() {
                if let Ok(bytes) = fs::read(item.path()) {
                    if let Ok(entry) = serde_json::from_slice::<CacheEntry>(&bytes) {
                        out.push(entry);
                    }
                }
            }
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        out
    }

    fn clear(&self) {
        if let Ok(dir) = fs::read_dir(&self.root) {
            for item in dir.flatten() {
                let _ = fs::remove_file(item.path());
            }
        }
    }
}
