//! Bundled offline corpus: stand-in texts for the three papers and three
//! log excerpts, with sizes and per-log timestamp formats recorded in a
//! JSON manifest.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Paper,
    Log,
}

#[derive(Debug, Clone)]
pub struct CorpusDocument {
    pub title: String,
    pub kind: DocKind,
    pub body: String,
    pub size_bytes: u64,
    /// strftime-style format used to parse timestamps out of log lines.
    pub timestamp_format: Option<String>,
    /// The error keyword the log-analytics workload filters on.
    pub keyword: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    title: String,
    kind: DocKind,
    path: String,
    size_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp_format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keyword: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    documents: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest unreadable: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest invalid: {0}")]
    Invalid(#[from] serde_json::Error),
    #[error("corpus document missing: {0}")]
    Missing(String),
}

pub struct Corpus {
    documents: Vec<CorpusDocument>,
}

impl Corpus {
    /// The corpus compiled into the binary; used by tests and default runs.
    pub fn bundled() -> Arc<Corpus> {
        static BUNDLED: OnceLock<Arc<Corpus>> = OnceLock::new();
        Arc::clone(BUNDLED.get_or_init(|| {
            let manifest: Manifest =
                serde_json::from_str(include_str!("../../fixtures/manifest.json"))
                    .expect("bundled manifest is valid");
            let bodies: &[(&str, &str)] = &[
                ("p1.txt", include_str!("../../fixtures/p1.txt")),
                ("p2.txt", include_str!("../../fixtures/p2.txt")),
                ("p3.txt", include_str!("../../fixtures/p3.txt")),
                ("apache.log", include_str!("../../fixtures/apache.log")),
                ("hadoop.log", include_str!("../../fixtures/hadoop.log")),
                ("openssh.log", include_str!("../../fixtures/openssh.log")),
            ];
            let documents = manifest
                .documents
                .into_iter()
                .map(|entry| {
                    let body = bodies
                        .iter()
                        .find(|(p, _)| *p == entry.path)
                        .map(|(_, b)| (*b).to_string())
                        .expect("bundled body present for manifest entry");
                    CorpusDocument {
                        title: entry.title,
                        kind: entry.kind,
                        size_bytes: body.len() as u64,
                        body,
                        timestamp_format: entry.timestamp_format,
                        keyword: entry.keyword,
                    }
                })
                .collect();
            Arc::new(Corpus { documents })
        }))
    }

    /// Load a corpus from an on-disk manifest (paths relative to it).
    pub fn load(manifest_path: &Path) -> Result<Corpus, CorpusError> {
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let mut documents = Vec::new();
        for entry in manifest.documents {
            let body = std::fs::read_to_string(base.join(&entry.path))
                .map_err(|_| CorpusError::Missing(entry.path.clone()))?;
            documents.push(CorpusDocument {
                title: entry.title,
                kind: entry.kind,
                size_bytes: body.len() as u64,
                body,
                timestamp_format: entry.timestamp_format,
                keyword: entry.keyword,
            });
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[CorpusDocument] {
        &self.documents
    }

    /// Case-insensitive lookup on the full title.
    pub fn find_title(&self, title: &str) -> Option<&CorpusDocument> {
        let lowered = title.to_lowercase();
        self.documents
            .iter()
            .find(|d| d.title.to_lowercase() == lowered)
    }

    pub fn papers(&self) -> impl Iterator<Item = &CorpusDocument> {
        self.documents.iter().filter(|d| d.kind == DocKind::Paper)
    }

    pub fn logs(&self) -> impl Iterator<Item = &CorpusDocument> {
        self.documents.iter().filter(|d| d.kind == DocKind::Log)
    }
}
