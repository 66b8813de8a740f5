//! Blob store for large payloads: in-memory (tests) and local-directory
//! (CLI runs) backends behind one contract. Object keys are content hashes,
//! which makes refs immutable by construction.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Opaque reference to a payload held in a blob store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    /// `blob://<store>/<object key>`
    pub uri: String,
    pub size_bytes: u64,
    pub content_type: String,
}

impl BlobRef {
    /// Splits the uri into (store, key); `None` when the scheme is foreign.
    pub fn parse_uri(&self) -> Option<(&str, &str)> {
        let rest = self.uri.strip_prefix("blob://")?;
        rest.split_once('/')
    }
}

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("blob not found: {0}")]
    NotFound(String),
    #[error("blob write failed: {0}")]
    WriteFailed(String),
    #[error("invalid blob uri: {0}")]
    InvalidUri(String),
}

pub trait BlobStore: Send + Sync {
    fn put(&self, store: &str, bytes: &[u8], content_type: &str) -> Result<BlobRef, BlobError>;
    fn get(&self, blob: &BlobRef) -> Result<Vec<u8>, BlobError>;
    /// Resolve by uri alone (for refs arriving as plain strings in args).
    fn get_uri(&self, uri: &str) -> Result<Vec<u8>, BlobError>;
}

fn object_key(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn make_ref(store: &str, key: &str, bytes: &[u8], content_type: &str) -> BlobRef {
    BlobRef {
        uri: format!("blob://{store}/{key}"),
        size_bytes: bytes.len() as u64,
        content_type: content_type.to_string(),
    }
}

/// Process-local blob store for tests and fully in-memory runs.
#[derive(Default)]
pub struct MemoryBlobStore {
    objects: Mutex<HashMap<String, Vec<u8>>>,
}

impl MemoryBlobStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BlobStore for MemoryBlobStore {
    fn put(&self, store: &str, bytes: &[u8], content_type: &str) -> Result<BlobRef, BlobError> {
        let key = object_key(bytes);
        let uri = format!("blob://{store}/{key}");
        self.objects
            .lock()
            .unwrap()
            .entry(uri.clone())
            .or_insert_with(|| bytes.to_vec());
        Ok(make_ref(store, &key, bytes, content_type))
    }

    fn get(&self, blob: &BlobRef) -> Result<Vec<u8>, BlobError> {
        self.get_uri(&blob.uri)
    }

    fn get_uri(&self, uri: &str) -> Result<Vec<u8>, BlobError> {
        self.objects
            .lock()
            .unwrap()
            .get(uri)
            .cloned()
            .ok_or_else(|| BlobError::NotFound(uri.to_string()))
    }
}

/// Sidecar metadata written next to each object file.
#[derive(Debug, Serialize, Deserialize)]
struct BlobMeta {
    content_type: String,
    size: u64,
    created_at: u64,
    ttl: Option<u64>,
}

/// Local-directory blob store: `<root>/<store>/<sha256>` with a
/// `<sha256>.meta` sidecar holding content type, size, created_at and ttl.
pub struct DirBlobStore {
    root: PathBuf,
}

impl DirBlobStore {
    pub fn new(root: impl AsRef<Path>) -> Self {
        DirBlobStore {
            root: root.as_ref().to_path_buf(),
        }
    }

    fn object_path(&self, store: &str, key: &str) -> PathBuf {
        self.root.join(store).join(key)
    }
}

impl BlobStore for DirBlobStore {
    fn put(&self, store: &str, bytes: &[u8], content_type: &str) -> Result<BlobRef, BlobError> {
        let key = object_key(bytes);
        let dir = self.root.join(store);
        fs::create_dir_all(&dir).map_err(|e| BlobError::WriteFailed(e.to_string()))?;
        let path = self.object_path(store, &key);
        if !path.exists() {
            fs::write(&path, bytes).map_err(|e| BlobError::WriteFailed(e.to_string()))?;
            let meta = BlobMeta {
                content_type: content_type.to_string(),
                size: bytes.len() as u64,
                created_at: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                ttl: None,
            };
            let meta_path = dir.join(format!("{key}.meta"));
            fs::write(&meta_path, serde_json::to_vec(&meta).unwrap())
                .map_err(|e| BlobError::WriteFailed(e.to_string()))?;
        }
        Ok(make_ref(store, &key, bytes, content_type))
    }

    fn get(&self, blob: &BlobRef) -> Result<Vec<u8>, BlobError> {
        self.get_uri(&blob.uri)
    }

    fn get_uri(&self, uri: &str) -> Result<Vec<u8>, BlobError> {
        let rest = uri
            .strip_prefix("blob://")
            .ok_or_else(|| BlobError::InvalidUri(uri.to_string()))?;
        let (store, key) = rest
            .split_once('/')
            .ok_or_else(|| BlobError::InvalidUri(uri.to_string()))?;
        fs::read(self.object_path(store, key)).map_err(|_| BlobError::NotFound(uri.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_round_trip() {
        let store = MemoryBlobStore::new();
        let r = store.put("docs", b"hello", "text/plain").unwrap();
        assert_eq!(r.size_bytes, 5);
        assert_eq!(store.get(&r).unwrap(), b"hello");
    }

    #[test]
    fn identical_bytes_resolve_identically() {
        let store = MemoryBlobStore::new();
        let a = store.put("docs", b"same", "text/plain").unwrap();
        let b = store.put("docs", b"same", "text/plain").unwrap();
        assert_eq!(store.get(&a).unwrap(), store.get(&b).unwrap());
        assert_eq!(a.uri, b.uri);
    }

    #[test]
    fn unknown_ref_is_not_found() {
        let store = MemoryBlobStore::new();
        let r = BlobRef {
            uri: "blob://docs/deadbeef".into(),
            size_bytes: 1,
            content_type: "text/plain".into(),
        };
        assert!(matches!(store.get(&r), Err(BlobError::NotFound(_))));
    }

    #[test]
    fn dir_store_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let store = DirBlobStore::new(tmp.path());
        let r = store.put("docs", b"abc", "text/plain").unwrap();
        let (s, key) = r.parse_uri().unwrap();
        assert!(tmp.path().join(s).join(key).exists());
        assert!(tmp.path().join(s).join(format!("{key}.meta")).exists());
        assert_eq!(store.get(&r).unwrap(), b"abc");
    }
}
