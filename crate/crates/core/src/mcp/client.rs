use std::collections::BTreeMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::Value;
use thiserror::Error;

use super::envelope::{RpcEnvelope, RpcId, RpcMethod, PROTOCOL_VERSION};
use super::transport::{Transport, TransportError};
use super::types::{ServerInfo, ToolCallRequest, ToolCallResult, ToolDescriptor};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session not initialized")]
    NotInitialized,
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("rpc error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: String, got: String },
    #[error("malformed response payload: {0}")]
    Malformed(String),
}

/// One logical client session. Serializes its own request/response pairs;
/// the underlying transport may be shared across sessions.
pub struct McpSession {
    transport: Arc<dyn Transport>,
    server_info: Mutex<Option<ServerInfo>>,
    next_id: AtomicI64,
}

impl McpSession {
    /// A session that has not completed the handshake yet; `tools/list` and
    /// `tools/call` report a protocol-state error until `initialize` runs.
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        McpSession {
            transport,
            server_info: Mutex::new(None),
            next_id: AtomicI64::new(1),
        }
    }

    pub fn initialize(&self) -> Result<ServerInfo, SessionError> {
        let params = serde_json::json!({
            "protocolVersion": PROTOCOL_VERSION,
            "clientInfo": { "name": "fame", "version": env!("CARGO_PKG_VERSION") },
        });
        let result = self.roundtrip(RpcMethod::Initialize, params)?;
        let info: ServerInfo = serde_json::from_value(
            result
                .get("serverInfo")
                .cloned()
                .ok_or_else(|| SessionError::Handshake("missing serverInfo".into()))?,
        )
        .map_err(|e| SessionError::Handshake(e.to_string()))?;
        let version = result
            .get("protocolVersion")
            .and_then(Value::as_str)
            .unwrap_or("");
        if version != PROTOCOL_VERSION {
            return Err(SessionError::Handshake(format!(
                "protocol version mismatch: server {version:?}"
            )));
        }
        *self.server_info.lock().unwrap() = Some(info.clone());
        Ok(info)
    }

    pub fn server_info(&self) -> Option<ServerInfo> {
        self.server_info.lock().unwrap().clone()
    }

    fn ensure_initialized(&self) -> Result<(), SessionError> {
        if self.server_info.lock().unwrap().is_some() {
            Ok(())
        } else {
            Err(SessionError::NotInitialized)
        }
    }

    pub fn list_tools(&self) -> Result<Vec<ToolDescriptor>, SessionError> {
        self.ensure_initialized()?;
        let result = self.roundtrip(RpcMethod::ToolsList, serde_json::json!({}))?;
        let tools = result
            .get("tools")
            .cloned()
            .ok_or_else(|| SessionError::Malformed("missing tools field".into()))?;
        serde_json::from_value(tools).map_err(|e| SessionError::Malformed(e.to_string()))
    }

    pub fn call_tool(&self, req: &ToolCallRequest) -> Result<ToolCallResult, SessionError> {
        self.ensure_initialized()?;
        let request = RpcEnvelope::request(
            RpcId::Str(req.request_id.clone()),
            RpcMethod::ToolsCall,
            serde_json::json!({
                "name": req.tool_name,
                "arguments": Value::Object(req.arguments.clone()),
            }),
        );
        let response = self.transport.roundtrip(&request)?;
        if response.id().to_string() != req.request_id {
            return Err(SessionError::IdMismatch {
                expected: req.request_id.clone(),
                got: response.id().to_string(),
            });
        }
        match response {
            RpcEnvelope::Response { result, .. } => {
                let mut parsed: ToolCallResult = serde_json::from_value(result)
                    .map_err(|e| SessionError::Malformed(e.to_string()))?;
                parsed.request_id = req.request_id.clone();
                Ok(parsed)
            }
            RpcEnvelope::ErrorResponse { error, .. } => Err(SessionError::Rpc {
                code: error.code,
                message: error.message,
            }),
            RpcEnvelope::Request { .. } => {
                Err(SessionError::Malformed("request envelope in response".into()))
            }
        }
    }

    fn roundtrip(&self, method: RpcMethod, params: Value) -> Result<Value, SessionError> {
        let id = RpcId::Num(self.next_id.fetch_add(1, Ordering::SeqCst));
        let request = RpcEnvelope::request(id.clone(), method, params);
        let response = self.transport.roundtrip(&request)?;
        if response.id() != &id {
            return Err(SessionError::IdMismatch {
                expected: id.to_string(),
                got: response.id().to_string(),
            });
        }
        match response {
            RpcEnvelope::Response { result, .. } => Ok(result),
            RpcEnvelope::ErrorResponse { error, .. } => Err(SessionError::Rpc {
                code: error.code,
                message: error.message,
            }),
            RpcEnvelope::Request { .. } => {
                Err(SessionError::Malformed("request envelope in response".into()))
            }
        }
    }
}

/// Complete the handshake against a transport and return a live session.
pub fn initialize_session(transport: Arc<dyn Transport>) -> Result<McpSession, SessionError> {
    let session = McpSession::new(transport);
    session.initialize()?;
    Ok(session)
}

/// Routes tool calls by name across several sessions.
pub struct ToolRouter {
    sessions: Vec<Arc<McpSession>>,
    by_tool: BTreeMap<String, usize>,
    descriptors: Vec<ToolDescriptor>,
}

impl ToolRouter {
    pub fn new(sessions: Vec<Arc<McpSession>>) -> Result<Self, SessionError> {
        let mut by_tool = BTreeMap::new();
        let mut descriptors = Vec::new();
        for (index, session) in sessions.iter().enumerate() {
            for descriptor in session.list_tools()? {
                // First registration wins on duplicates across servers.
                by_tool.entry(descriptor.name.clone()).or_insert(index);
                descriptors.push(descriptor);
            }
        }
        Ok(ToolRouter {
            sessions,
            by_tool,
            descriptors,
        })
    }

    pub fn descriptors(&self) -> &[ToolDescriptor] {
        &self.descriptors
    }

    /// Unknown tools yield an error *result* (visible to the LLM loop), not
    /// a transport error.
    pub fn call(&self, req: &ToolCallRequest) -> Result<ToolCallResult, SessionError> {
        match self.by_tool.get(&req.tool_name) {
            Some(index) => self.sessions[*index].call_tool(req),
            None => Ok(ToolCallResult::error(
                &req.request_id,
                format!("unknown tool: {}", req.tool_name),
            )),
        }
    }
}
