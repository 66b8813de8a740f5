use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// One record per hosted invocation. `cache_hit == true` implies the handler
/// was not executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationTelemetry {
    pub tool_name: String,
    pub duration_ms: u64,
    pub cache_hit: bool,
    pub memory_mb: u32,
    pub timestamp_ms: u64,
}

/// Append-only in-process telemetry collector.
#[derive(Default)]
pub struct TelemetrySink {
    records: Mutex<Vec<InvocationTelemetry>>,
}

impl TelemetrySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, record: InvocationTelemetry) {
        self.records.lock().unwrap().push(record);
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<InvocationTelemetry> {
        self.records.lock().unwrap().clone()
    }

    /// Records appended since a previous `len()` mark.
    pub fn since(&self, mark: usize) -> Vec<InvocationTelemetry> {
        self.records.lock().unwrap()[mark..].to_vec()
    }
}
