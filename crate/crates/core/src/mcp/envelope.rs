//! JSON-RPC 2.0 framing with UTF-8 bodies.
//!
//! The method set is closed (`initialize`, `tools/list`, `tools/call`),
//! unknown extra fields are ignored on decode and a response carries exactly
//! one of `result` / `error`.

use serde_json::Value;
use thiserror::Error;

pub const PROTOCOL_VERSION: &str = "2025-06-18";

#[derive(Debug, Clone, PartialEq)]
pub enum RpcId {
    Num(i64),
    Str(String),
}

impl RpcId {
    fn to_value(&self) -> Value {
        match self {
            RpcId::Num(n) => Value::from(*n),
            RpcId::Str(s) => Value::from(s.clone()),
        }
    }

    fn from_value(v: &Value) -> Option<RpcId> {
        match v {
            Value::Number(n) => n.as_i64().map(RpcId::Num),
            Value::String(s) => Some(RpcId::Str(s.clone())),
            _ => None,
        }
    }
}

impl std::fmt::Display for RpcId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RpcId::Num(n) => write!(f, "{n}"),
            RpcId::Str(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpcMethod {
    Initialize,
    ToolsList,
    ToolsCall,
}

impl RpcMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RpcMethod::Initialize => "initialize",
            RpcMethod::ToolsList => "tools/list",
            RpcMethod::ToolsCall => "tools/call",
        }
    }

    fn parse(s: &str) -> Option<RpcMethod> {
        match s {
            "initialize" => Some(RpcMethod::Initialize),
            "tools/list" => Some(RpcMethod::ToolsList),
            "tools/call" => Some(RpcMethod::ToolsCall),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RpcEnvelope {
    Request {
        id: RpcId,
        method: RpcMethod,
        params: Value,
    },
    Response {
        id: RpcId,
        result: Value,
    },
    ErrorResponse {
        id: RpcId,
        error: RpcError,
    },
}

impl RpcEnvelope {
    pub fn id(&self) -> &RpcId {
        match self {
            RpcEnvelope::Request { id, .. }
            | RpcEnvelope::Response { id, .. }
            | RpcEnvelope::ErrorResponse { id, .. } => id,
        }
    }

    pub fn request(id: RpcId, method: RpcMethod, params: Value) -> Self {
        RpcEnvelope::Request { id, method, params }
    }

    pub fn response(id: RpcId, result: Value) -> Self {
        RpcEnvelope::Response { id, result }
    }

    pub fn error(id: RpcId, code: i64, message: impl Into<String>) -> Self {
        RpcEnvelope::ErrorResponse {
            id,
            error: RpcError {
                code,
                message: message.into(),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("parse error at byte {offset}: {detail}")]
    Parse { offset: usize, detail: String },
    #[error("invalid envelope: {0}")]
    Invalid(String),
}

pub fn encode_envelope(env: &RpcEnvelope) -> Vec<u8> {
    let body = match env {
        RpcEnvelope::Request { id, method, params } => serde_json::json!({
            "jsonrpc": "2.0",
            "id": id.to_value(),
            "method": method.as_str(),
            "params": params,
        }),
        RpcEnvelope::Response { id, result } => serde_json::json!({
            "jsonrpc": "2.0",
            "id": id.to_value(),
            "result": result,
        }),
        RpcEnvelope::ErrorResponse { id, error } => serde_json::json!({
            "jsonrpc": "2.0",
            "id": id.to_value(),
            "error": { "code": error.code, "message": error.message },
        }),
    };
    serde_json::to_vec(&body).expect("envelope serialization is infallible")
}

pub fn decode_envelope(bytes: &[u8]) -> Result<RpcEnvelope, EnvelopeError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| EnvelopeError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        detail: e.to_string(),
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| EnvelopeError::Invalid("body is not a JSON object".into()))?;

    match obj.get("jsonrpc").and_then(Value::as_str) {
        Some("2.0") => {}
        Some(other) => {
            return Err(EnvelopeError::Invalid(format!(
                "unsupported jsonrpc version {other:?}"
            )))
        }
        None => return Err(EnvelopeError::Invalid("missing jsonrpc field".into())),
    }

    let id = obj
        .get("id")
        .and_then(RpcId::from_value)
        .ok_or_else(|| EnvelopeError::Invalid("missing or non string/number id".into()))?;

    let has_method = obj.contains_key("method");
    let has_result = obj.contains_key("result");
    let has_error = obj.contains_key("error");

    if has_method {
        let method_str = obj
            .get("method")
            .and_then(Value::as_str)
            .ok_or_else(|| EnvelopeError::Invalid("method is not a string".into()))?;
        let method = RpcMethod::parse(method_str)
            .ok_or_else(|| EnvelopeError::Invalid(format!("unknown method {method_str:?}")))?;
        let params = obj.get("params").cloned().unwrap_or(Value::Null);
        return Ok(RpcEnvelope::Request { id, method, params });
    }

    match (has_result, has_error) {
        (true, false) => Ok(RpcEnvelope::Response {
            id,
            result: obj.get("result").cloned().unwrap_or(Value::Null),
        }),
        (false, true) => {
            let err = obj
                .get("error")
                .and_then(Value::as_object)
                .ok_or_else(|| EnvelopeError::Invalid("error is not an object".into()))?;
            Ok(RpcEnvelope::ErrorResponse {
                id,
                error: RpcError {
                    code: err.get("code").and_then(Value::as_i64).unwrap_or(-32000),
                    message: err
                        .get("message")
                        .and_then(Value::as_str)
                        .unwrap_or("")
                        .to_string(),
                },
            })
        }
        (true, true) => Err(EnvelopeError::Invalid(
            "response carries both result and error".into(),
        )),
        (false, false) => Err(EnvelopeError::Invalid(
            "envelope has neither method, result nor error".into(),
        )),
    }
}

/// Translate serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current_line = 1;
    let mut offset = 0;
    for (i, b) in bytes.iter().enumerate() {
        if current_line == line {
            offset = i;
            break;
        }
        if *b == b'\n' {
            current_line += 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}
