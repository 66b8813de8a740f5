//! Session memory: the five run configurations, client-side interaction
//! memory, and per-invocation persistence of agent transcripts with
//! positional prefix subtraction so each invocation stores only what it
//! added.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::ChatMessage;
use crate::host::{HostSettings, DEFAULT_INLINE_THRESHOLD};

/// One cell of the configuration grid: which of the three mechanisms are
/// active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub client_memory: bool,
    pub agent_memory: bool,
    pub mcp_caching: bool,
}

impl MemoryConfig {
    pub const E: MemoryConfig = MemoryConfig {
        client_memory: false,
        agent_memory: false,
        mcp_caching: false,
    };
    pub const N: MemoryConfig = MemoryConfig {
        client_memory: true,
        agent_memory: false,
        mcp_caching: false,
    };
    pub const C: MemoryConfig = MemoryConfig {
        client_memory: true,
        agent_memory: false,
        mcp_caching: true,
    };
    pub const M: MemoryConfig = MemoryConfig {
        client_memory: true,
        agent_memory: true,
        mcp_caching: false,
    };
    pub const M_PLUS_C: MemoryConfig = MemoryConfig {
        client_memory: true,
        agent_memory: true,
        mcp_caching: true,
    };

    pub fn all() -> [MemoryConfig; 5] {
        [Self::E, Self::N, Self::C, Self::M, Self::M_PLUS_C]
    }

    pub fn label(&self) -> &'static str {
        match (self.client_memory, self.agent_memory, self.mcp_caching) {
            (false, false, false) => "E",
            (true, false, false) => "N",
            (true, false, true) => "C",
            (true, true, false) => "M",
            (true, true, true) => "M+C",
            _ => "custom",
        }
    }

    pub fn parse(label: &str) -> Option<MemoryConfig> {
        Self::all().into_iter().find(|c| c.label() == label)
    }

    /// Blob indirection rides on the infrastructure that makes references
    /// worthwhile: either the invocation cache or agent memory. Without
    /// both, results are inlined in full.
    pub fn blob_indirection(&self) -> bool {
        self.mcp_caching || self.agent_memory
    }

    pub fn host_settings(&self) -> HostSettings {
        HostSettings {
            caching_enabled: self.mcp_caching,
            inline_threshold: self
                .blob_indirection()
                .then_some(DEFAULT_INLINE_THRESHOLD),
            ttl_override: None,
        }
    }
}

/// Client-side memory: the question/answer pairs of earlier invocations,
/// replayed into later prompts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientMemory {
    pairs: Vec<(String, String)>,
}

impl ClientMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, question: &str, answer: &str) {
        self.pairs.push((question.to_string(), answer.to_string()));
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn render(&self) -> String {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, (q, a))| format!("Previous interaction {}: Q: {q} A: {a}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// What one invocation added to the session: its transcript suffix plus
/// summary fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub session_id: String,
    pub invocation_id: String,
    pub query: String,
    pub final_response: String,
    pub status: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("record already exists for session {session_id} invocation {invocation_id}")]
    Conflict {
        session_id: String,
        invocation_id: String,
    },
    #[error("memory store io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("memory store corrupt: {0}")]
    Corrupt(String),
}

pub trait MemoryStore: Send + Sync {
    /// Appends one record; a duplicate (session, invocation) pair is a
    /// conflict.
    fn append(&self, record: &MemoryRecord) -> Result<(), MemoryError>;
    /// Records for a session in append order; unknown sessions are empty.
    fn load_session(&self, session_id: &str) -> Result<Vec<MemoryRecord>, MemoryError>;
}

#[derive(Default)]
pub struct InMemoryStore {
    sessions: Mutex<BTreeMap<String, Vec<MemoryRecord>>>,
}

impl InMemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl MemoryStore for InMemoryStore {
    fn append(&self, record: &MemoryRecord) -> Result<(), MemoryError> {
        let mut sessions = self.sessions.lock().unwrap();
        let records = sessions.entry(record.session_id.clone()).or_default();
        if records
            .iter()
            .any(|r| r.invocation_id == record.invocation_id)
        {
            return Err(MemoryError::Conflict {
                session_id: record.session_id.clone(),
                invocation_id: record.invocation_id.clone(),
            });
        }
        records.push(record.clone());
        Ok(())
    }

    fn load_session(&self, session_id: &str) -> Result<Vec<MemoryRecord>, MemoryError> {
        Ok(self
            .sessions
            .lock()
            .unwrap()
            .get(session_id)
            .cloned()
            .unwrap_or_default())
    }
}

/// JSONL-per-session store under `<root>/sessions/`.
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    pub fn new(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root.join("sessions"))?;
        Ok(FileStore {
            root: root.to_path_buf(),
        })
    }

    fn session_path(&self, session_id: &str) -> PathBuf {
        let safe: String = session_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        self.root.join("sessions").join(format!("{safe}.jsonl"))
    }
}

impl MemoryStore for FileStore {
    fn append(&self, record: &MemoryRecord) -> Result<(), MemoryError> {
        let existing = self.load_session(&record.session_id)?;
        if existing
            .iter()
            .any(|r| r.invocation_id == record.invocation_id)
        {
            return Err(MemoryError::Conflict {
                session_id: record.session_id.clone(),
                invocation_id: record.invocation_id.clone(),
            });
        }
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.session_path(&record.session_id))?;
        let line =
            serde_json::to_string(record).map_err(|e| MemoryError::Corrupt(e.to_string()))?;
        writeln!(file, "{line}")?;
        Ok(())
    }

    fn load_session(&self, session_id: &str) -> Result<Vec<MemoryRecord>, MemoryError> {
        let path = self.session_path(session_id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let body = std::fs::read_to_string(path)?;
        body.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| MemoryError::Corrupt(e.to_string())))
            .collect()
    }
}

/// Decorator that counts operations; used to verify configuration gating.
pub struct CountingStore {
    inner: Arc<dyn MemoryStore>,
    appends: AtomicU64,
    loads: AtomicU64,
}

impl CountingStore {
    pub fn new(inner: Arc<dyn MemoryStore>) -> Self {
        CountingStore {
            inner,
            appends: AtomicU64::new(0),
            loads: AtomicU64::new(0),
        }
    }

    pub fn appends(&self) -> u64 {
        self.appends.load(Ordering::SeqCst)
    }

    pub fn loads(&self) -> u64 {
        self.loads.load(Ordering::SeqCst)
    }
}

impl MemoryStore for CountingStore {
    fn append(&self, record: &MemoryRecord) -> Result<(), MemoryError> {
        self.appends.fetch_add(1, Ordering::SeqCst);
        self.inner.append(record)
    }

    fn load_session(&self, session_id: &str) -> Result<Vec<MemoryRecord>, MemoryError> {
        self.loads.fetch_add(1, Ordering::SeqCst);
        self.inner.load_session(session_id)
    }
}

/// Messages injected into a new invocation: everything earlier invocations
/// stored, in order.
pub fn session_messages(records: &[MemoryRecord]) -> Vec<ChatMessage> {
    records
        .iter()
        .flat_map(|r| r.messages.iter().cloned())
        .collect()
}

/// Store the suffix an invocation added to its working message list. The
/// working list starts with the messages injected from this store, so the
/// stored suffix is `working[prior_total..]`.
#[allow(clippy::too_many_arguments)]
pub fn persist_invocation(
    store: &dyn MemoryStore,
    session_id: &str,
    invocation_id: &str,
    query: &str,
    final_response: &str,
    status: &str,
    working_messages: &[ChatMessage],
) -> Result<MemoryRecord, MemoryError> {
    let prior = store.load_session(session_id)?;
    let prior_total: usize = prior.iter().map(|r| r.messages.len()).sum();
    let suffix = working_messages
        .get(prior_total..)
        .unwrap_or_default()
        .to_vec();
    let record = MemoryRecord {
        session_id: session_id.to_string(),
        invocation_id: invocation_id.to_string(),
        query: query.to_string(),
        final_response: final_response.to_string(),
        status: status.to_string(),
        messages: suffix,
    };
    store.append(&record)?;
    Ok(record)
}
