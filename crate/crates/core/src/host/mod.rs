//! FaaS-style hosting shell for tool handlers: per-invocation cache with
//! TTL keyed by a content hash of name + arguments, blob store for large
//! payloads and per-invocation telemetry.

mod blob;
mod cache;
mod canonical;
mod telemetry;

pub use blob::{BlobError, BlobRef, BlobStore, DirBlobStore, MemoryBlobStore};
pub use cache::{CacheEntry, DirCache, InvocationCache, MemoryCache, Ttl};
pub use canonical::{cache_key, canonical_json, json_number, KeyError};
pub use telemetry::{InvocationTelemetry, TelemetrySink};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use crate::mcp::{ContentItem, ToolCallRequest, ToolCallResult, ToolDescriptor};

/// Default boundary between inline text and blob-store indirection. Keeps a
/// single transcript message well under typical LLM context budgets.
pub const DEFAULT_INLINE_THRESHOLD: u64 = 65_536;

/// Default function memory for hosted tools, in MB.
pub const DEFAULT_MEMORY_MB: u32 = 512;

/// Virtual duration charged for a cache hit.
const CACHE_HIT_MS: u64 = 2;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
    /// Virtual clocks advance deterministically; wall clocks ignore this.
    fn advance_ms(&self, _ms: u64) {}
    fn is_virtual(&self) -> bool {
        false
    }
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Injectable clock so TTL expiry and report latencies are testable and
/// reproducible without sleeping.
#[derive(Default)]
pub struct ManualClock {
    ms: AtomicU64,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(ms: u64) -> Self {
        ManualClock {
            ms: AtomicU64::new(ms),
        }
    }

    pub fn set_ms(&self, ms: u64) {
        self.ms.store(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.ms.load(Ordering::SeqCst)
    }

    fn advance_ms(&self, ms: u64) {
        self.ms.fetch_add(ms, Ordering::SeqCst);
    }

    fn is_virtual(&self) -> bool {
        true
    }
}

/// Handler-side failure channels: a tool error rides in the result envelope,
/// a host error (e.g. blob-store write failure) surfaces to the host.
#[derive(Debug, Error)]
pub enum HandlerError {
    #[error("{0}")]
    Tool(String),
    #[error("host failure: {0}")]
    Host(String),
}

impl From<BlobError> for HandlerError {
    fn from(e: BlobError) -> Self {
        match e {
            BlobError::WriteFailed(m) => HandlerError::Host(m),
            other => HandlerError::Tool(other.to_string()),
        }
    }
}

#[derive(Debug, Error)]
pub enum HostError {
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("host failure: {0}")]
    Host(String),
}

/// Execution context handed to handlers: blob access plus the inline/blob
/// decision threshold.
pub struct HostContext {
    pub blob_store: Arc<dyn BlobStore>,
    pub store_name: String,
    pub inline_threshold: u64,
}

impl HostContext {
    /// Inline text iff `bytes` fits the threshold (inclusive) and is UTF-8,
    /// otherwise store and return a blob reference.
    pub fn inline_or_blob(
        &self,
        bytes: &[u8],
        content_type: &str,
    ) -> Result<ContentItem, HandlerError> {
        inline_or_blob(
            self.blob_store.as_ref(),
            &self.store_name,
            bytes,
            content_type,
            self.inline_threshold,
        )
    }

    pub fn put_blob(&self, bytes: &[u8], content_type: &str) -> Result<BlobRef, HandlerError> {
        Ok(self.blob_store.put(&self.store_name, bytes, content_type)?)
    }

    /// Resolve an argument value that may be inline text, a `{"$blob": uri}`
    /// wrapper or a bare `blob://` uri string.
    pub fn resolve_text(&self, value: &Value) -> Result<String, HandlerError> {
        match value {
            Value::String(s) if s.starts_with("blob://") => {
                let bytes = self
                    .blob_store
                    .get_uri(s)
                    .map_err(|e| HandlerError::Tool(e.to_string()))?;
                String::from_utf8(bytes)
                    .map_err(|_| HandlerError::Tool("blob content is not text".into()))
            }
            Value::String(s) => Ok(s.clone()),
            Value::Object(map) => {
                if let Some(Value::String(uri)) = map.get("$blob") {
                    return self.resolve_text(&Value::String(uri.clone()));
                }
                if let Some(Value::String(uri)) = map.get("uri") {
                    if uri.starts_with("blob://") {
                        return self.resolve_text(&Value::String(uri.clone()));
                    }
                }
                Err(HandlerError::Tool(
                    "expected text or blob reference".into(),
                ))
            }
            other => Err(HandlerError::Tool(format!(
                "expected text or blob reference, got {other}"
            ))),
        }
    }
}

/// Free-function form of the inline/blob decision.
pub fn inline_or_blob(
    store: &dyn BlobStore,
    store_name: &str,
    bytes: &[u8],
    content_type: &str,
    threshold_bytes: u64,
) -> Result<ContentItem, HandlerError> {
    if bytes.len() as u64 <= threshold_bytes {
        if let Ok(text) = std::str::from_utf8(bytes) {
            return Ok(ContentItem::text(text));
        }
    }
    Ok(ContentItem::blob(store.put(
        store_name,
        bytes,
        content_type,
    )?))
}

pub trait ToolHandler: Send + Sync {
    fn invoke(
        &self,
        arguments: &serde_json::Map<String, Value>,
        ctx: &HostContext,
    ) -> Result<Vec<ContentItem>, HandlerError>;
}

impl<F> ToolHandler for F
where
    F: Fn(&serde_json::Map<String, Value>, &HostContext) -> Result<Vec<ContentItem>, HandlerError>
        + Send
        + Sync,
{
    fn invoke(
        &self,
        arguments: &serde_json::Map<String, Value>,
        ctx: &HostContext,
    ) -> Result<Vec<ContentItem>, HandlerError> {
        self(arguments, ctx)
    }
}

/// One deployable tool: descriptor, handler, cache TTL and function sizing.
pub struct HostedTool {
    pub descriptor: ToolDescriptor,
    pub handler: Arc<dyn ToolHandler>,
    pub ttl: Ttl,
    pub memory_mb: u32,
    /// Nominal execution time charged against a virtual clock; also feeds
    /// the deployment simulator's default timings.
    pub exec_ms_hint: u64,
}

impl HostedTool {
    pub fn new(descriptor: ToolDescriptor, handler: Arc<dyn ToolHandler>) -> Self {
        HostedTool {
            descriptor,
            handler,
            ttl: Ttl::Infinite,
            memory_mb: DEFAULT_MEMORY_MB,
            exec_ms_hint: 100,
        }
    }

    pub fn with_ttl(mut self, ttl: Ttl) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn with_memory_mb(mut self, memory_mb: u32) -> Self {
        assert!(memory_mb >= 1);
        self.memory_mb = memory_mb;
        self
    }

    pub fn with_exec_ms(mut self, exec_ms: u64) -> Self {
        self.exec_ms_hint = exec_ms;
        self
    }
}

/// Host-level settings derived from the run configuration.
#[derive(Debug, Clone)]
pub struct HostSettings {
    /// Global cache gate; combined with each tool's own TTL.
    pub caching_enabled: bool,
    /// `None` disables blob indirection entirely (everything inlined).
    pub inline_threshold: Option<u64>,
    /// Replaces every tool's own TTL when set (0 disables caching).
    pub ttl_override: Option<u64>,
}

impl Default for HostSettings {
    fn default() -> Self {
        HostSettings {
            caching_enabled: true,
            inline_threshold: Some(DEFAULT_INLINE_THRESHOLD),
            ttl_override: None,
        }
    }
}

/// The hosting shell: tool registry, cache, blob store, telemetry, clock.
pub struct ToolHost {
    name: String,
    tools: BTreeMap<String, HostedTool>,
    order: Vec<String>,
    cache: Arc<dyn InvocationCache>,
    blob_store: Arc<dyn BlobStore>,
    telemetry: Arc<TelemetrySink>,
    clock: Arc<dyn Clock>,
    settings: HostSettings,
    executions: AtomicU64,
}

impl ToolHost {
    pub fn new(
        name: &str,
        cache: Arc<dyn InvocationCache>,
        blob_store: Arc<dyn BlobStore>,
        telemetry: Arc<TelemetrySink>,
        clock: Arc<dyn Clock>,
        settings: HostSettings,
    ) -> Self {
        ToolHost {
            name: name.to_string(),
            tools: BTreeMap::new(),
            order: Vec::new(),
            cache,
            blob_store,
            telemetry,
            clock,
            settings,
            executions: AtomicU64::new(0),
        }
    }

    pub fn in_memory(name: &str) -> Self {
        ToolHost::new(
            name,
            Arc::new(MemoryCache::new()),
            Arc::new(MemoryBlobStore::new()),
            Arc::new(TelemetrySink::new()),
            Arc::new(SystemClock),
            HostSettings::default(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn register(&mut self, tool: HostedTool) {
        let name = tool.descriptor.name.clone();
        assert!(!name.is_empty(), "tool name must be non-empty");
        assert!(
            !self.tools.contains_key(&name),
            "duplicate tool name {name:?}"
        );
        self.order.push(name.clone());
        self.tools.insert(name, tool);
    }

    /// Descriptors in registration order; stable across calls.
    pub fn descriptors(&self) -> Vec<ToolDescriptor> {
        self.order
            .iter()
            .map(|n| self.tools[n].descriptor.clone())
            .collect()
    }

    pub fn has_tool(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn telemetry(&self) -> &Arc<TelemetrySink> {
        &self.telemetry
    }

    pub fn cache(&self) -> &Arc<dyn InvocationCache> {
        &self.cache
    }

    pub fn blob_store(&self) -> &Arc<dyn BlobStore> {
        &self.blob_store
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Total handler executions (cache hits excluded); used by tests.
    pub fn execution_count(&self) -> u64 {
        self.executions.load(Ordering::SeqCst)
    }

    fn context(&self) -> HostContext {
        HostContext {
            blob_store: Arc::clone(&self.blob_store),
            store_name: self.name.clone(),
            inline_threshold: self.settings.inline_threshold.unwrap_or(u64::MAX),
        }
    }

    pub fn handle_invocation(&self, req: &ToolCallRequest) -> ToolCallResult {
        let now_s = self.clock.now_ms() / 1000;
        self.handle_invocation_at(req, now_s)
    }

    /// Cache-aware invocation with an explicit "now" (seconds), so TTL
    /// boundaries are unit-testable without sleeping.
    pub fn handle_invocation_at(&self, req: &ToolCallRequest, now_s: u64) -> ToolCallResult {
        let tool = match self.tools.get(&req.tool_name) {
            Some(t) => t,
            None => {
                let result = ToolCallResult::error(
                    &req.request_id,
                    format!("unknown tool: {}", req.tool_name),
                );
                self.emit_telemetry(&req.tool_name, 0, false, DEFAULT_MEMORY_MB);
                return result;
            }
        };

        if let Err(msg) = validate_arguments(&tool.descriptor, &req.arguments) {
            self.emit_telemetry(&req.tool_name, 0, false, tool.memory_mb);
            return ToolCallResult::error(&req.request_id, msg);
        }

        let effective_ttl = if !self.settings.caching_enabled {
            Ttl::Disabled
        } else {
            match self.settings.ttl_override {
                Some(seconds) => Ttl::from_seconds(seconds),
                None => tool.ttl,
            }
        };

        let key = if effective_ttl.caching_enabled() {
            match cache_key(&req.tool_name, &req.arguments) {
                Ok(k) => Some(k),
                Err(e) => {
                    self.emit_telemetry(&req.tool_name, 0, false, tool.memory_mb);
                    return ToolCallResult::error(&req.request_id, e.to_string());
                }
            }
        } else {
            None
        };

        if let Some(key) = &key {
            if let Some(entry) = self.cache.get(key) {
                if entry.is_valid_at(now_s) {
                    self.clock.advance_ms(CACHE_HIT_MS);
                    self.emit_telemetry(&req.tool_name, CACHE_HIT_MS, true, tool.memory_mb);
                    return ToolCallResult {
                        request_id: req.request_id.clone(),
                        content: entry.payload,
                        is_error: false,
                        duration_ms: CACHE_HIT_MS,
                        cache_hit: true,
                    };
                }
            }
        }

        let ctx = self.context();
        let started = std::time::Instant::now();
        self.executions.fetch_add(1, Ordering::SeqCst);
        let outcome = tool.handler.invoke(&req.arguments, &ctx);
        let duration_ms = if self.clock.is_virtual() {
            tool.exec_ms_hint
        } else {
            (started.elapsed().as_millis() as u64).max(1)
        };
        self.clock.advance_ms(duration_ms);
        self.emit_telemetry(&req.tool_name, duration_ms, false, tool.memory_mb);

        match outcome {
            Ok(content) => {
                if let Some(key) = key {
                    self.cache.put(CacheEntry {
                        key,
                        payload: content.clone(),
                        created_at: now_s,
                        ttl: effective_ttl,
                    });
                }
                ToolCallResult {
                    request_id: req.request_id.clone(),
                    content,
                    is_error: false,
                    duration_ms,
                    cache_hit: false,
                }
            }
            // Errors are never cached.
            Err(HandlerError::Tool(msg)) => {
                let mut r = ToolCallResult::error(&req.request_id, msg);
                r.duration_ms = duration_ms;
                r
            }
            Err(HandlerError::Host(msg)) => {
                let mut r =
                    ToolCallResult::error(&req.request_id, format!("host failure: {msg}"));
                r.duration_ms = duration_ms;
                r
            }
        }
    }

    fn emit_telemetry(&self, tool_name: &str, duration_ms: u64, cache_hit: bool, memory_mb: u32) {
        self.telemetry.record(InvocationTelemetry {
            tool_name: tool_name.to_string(),
            duration_ms,
            cache_hit,
            memory_mb,
            timestamp_ms: self.clock.now_ms(),
        });
    }
}

/// Checks required parameters and loose type tags against the descriptor.
fn validate_arguments(
    descriptor: &ToolDescriptor,
    arguments: &serde_json::Map<String, Value>,
) -> Result<(), String> {
    for (name, spec) in &descriptor.input_schema {
        match arguments.get(name) {
            None if spec.required => {
                return Err(format!("missing required argument: {name}"));
            }
            None => {}
            Some(value) => {
                if !type_matches(&spec.type_tag, value) {
                    return Err(format!(
                        "argument {name} does not match type {}",
                        spec.type_tag
                    ));
                }
            }
        }
    }
    Ok(())
}

fn type_matches(type_tag: &str, value: &Value) -> bool {
    // Blob-reference wrappers substitute for any payload-bearing type.
    if let Value::Object(map) = value {
        if map.contains_key("$blob") {
            return true;
        }
    }
    match type_tag {
        "string" => matches!(value, Value::String(_)),
        "number" => matches!(value, Value::Number(_)),
        "boolean" => matches!(value, Value::Bool(_)),
        "list" => matches!(value, Value::Array(_)),
        "map" => matches!(value, Value::Object(_)),
        _ => true,
    }
}
