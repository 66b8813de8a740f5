//! Record/replay backends: capture live completions to a JSONL trace, then
//! replay them deterministically with fingerprint verification.

use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatBackend, ChatMessage, CompletionResult, GatewayError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    /// SHA-256 over the serialized request messages.
    pub fingerprint: String,
    pub message: ChatMessage,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

pub fn fingerprint_messages(messages: &[ChatMessage]) -> String {
    let serialized = serde_json::to_vec(messages).unwrap_or_default();
    hex::encode(Sha256::digest(&serialized))
}

/// Wraps another backend and appends every exchange to a trace file.
pub struct RecordingBackend<B: ChatBackend> {
    inner: B,
    sink: Mutex<std::fs::File>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn create(inner: B, path: &Path) -> std::io::Result<Self> {
        Ok(RecordingBackend {
            inner,
            sink: Mutex::new(std::fs::File::create(path)?),
        })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError> {
        let result = self.inner.complete(messages)?;
        let record = TraceRecord {
            fingerprint: fingerprint_messages(messages),
            message: result.message.clone(),
            input_tokens: result.input_tokens,
            output_tokens: result.output_tokens,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| GatewayError::Backend(e.to_string()))?;
        let mut sink = self.sink.lock().unwrap();
        writeln!(sink, "{line}").map_err(|e| GatewayError::Backend(e.to_string()))?;
        Ok(result)
    }
}

/// Replays a recorded trace in order; any divergence from the recorded
/// request sequence is an error.
pub struct ScriptedBackend {
    records: Mutex<std::vec::IntoIter<TraceRecord>>,
}

impl ScriptedBackend {
    pub fn new(records: Vec<TraceRecord>) -> Self {
        ScriptedBackend {
            records: Mutex::new(records.into_iter()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Replay(format!("trace unreadable: {e}")))?;
        let mut records = Vec::new();
        for (number, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(line).map_err(|e| {
                GatewayError::Replay(format!("trace line {} invalid: {e}", number + 1))
            })?;
            records.push(record);
        }
        Ok(ScriptedBackend::new(records))
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError> {
        let record = self
            .records
            .lock()
            .unwrap()
            .next()
            .ok_or_else(|| GatewayError::Replay("trace exhausted".into()))?;
        let fingerprint = fingerprint_messages(messages);
        if fingerprint != record.fingerprint {
            return Err(GatewayError::Replay(format!(
                "request fingerprint {fingerprint} does not match recorded {}",
                record.fingerprint
            )));
        }
        Ok(CompletionResult {
            message: record.message,
            input_tokens: record.input_tokens,
            output_tokens: record.output_tokens,
        })
    }
}
