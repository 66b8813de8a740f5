use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;

use super::envelope::{RpcEnvelope, RpcId, RpcMethod, PROTOCOL_VERSION};
use super::transport::EnvelopeHandler;
use super::types::{ServerInfo, ToolCallRequest};
use crate::host::ToolHost;

pub const ERR_INVALID_REQUEST: i64 = -32600;
pub const ERR_VERSION_MISMATCH: i64 = -32002;

/// An MCP server: identity plus a hosted tool registry. Stateless per
/// request, so it accepts concurrent independent sessions.
pub struct McpServer {
    info: ServerInfo,
    host: ToolHost,
}

impl McpServer {
    pub fn new(info: ServerInfo, host: ToolHost) -> Self {
        McpServer { info, host }
    }

    pub fn info(&self) -> &ServerInfo {
        &self.info
    }

    pub fn host(&self) -> &ToolHost {
        &self.host
    }

    fn handle_request(&self, id: RpcId, method: RpcMethod, params: Value) -> RpcEnvelope {
        match method {
            RpcMethod::Initialize => {
                if let Some(version) = params.get("protocolVersion").and_then(Value::as_str) {
                    if version != PROTOCOL_VERSION {
                        return RpcEnvelope::error(
                            id,
                            ERR_VERSION_MISMATCH,
                            format!(
                                "protocol version mismatch: client {version}, server {PROTOCOL_VERSION}"
                            ),
                        );
                    }
                }
                RpcEnvelope::response(
                    id,
                    serde_json::json!({
                        "protocolVersion": PROTOCOL_VERSION,
                        "serverInfo": self.info,
                    }),
                )
            }
            RpcMethod::ToolsList => RpcEnvelope::response(
                id,
                serde_json::json!({ "tools": self.host.descriptors() }),
            ),
            RpcMethod::ToolsCall => {
                let name = params.get("name").and_then(Value::as_str).unwrap_or("");
                let arguments = params.get("arguments").cloned().unwrap_or(Value::Null);
                let req = ToolCallRequest::new(&id.to_string(), name, arguments);
                let result = self.host.handle_invocation(&req);
                RpcEnvelope::response(
                    id,
                    serde_json::to_value(&result).expect("result serialization"),
                )
            }
        }
    }
}

impl EnvelopeHandler for McpServer {
    fn handle(&self, envelope: RpcEnvelope) -> RpcEnvelope {
        match envelope {
            RpcEnvelope::Request { id, method, params } => self.handle_request(id, method, params),
            RpcEnvelope::Response { id, .. } | RpcEnvelope::ErrorResponse { id, .. } => {
                RpcEnvelope::error(id, ERR_INVALID_REQUEST, "expected a request envelope")
            }
        }
    }
}

/// Running HTTP endpoint for a server; dropped or stopped explicitly.
pub struct ServeHandle {
    port: u16,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServeHandle {
    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}/", self.port)
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServeHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Serve a single JSON-RPC POST endpoint. Status 200 for both tool success
/// and tool error (the error rides in the envelope); non-200 only for
/// transport-level failure.
pub fn serve_http(server: Arc<McpServer>, port: u16) -> std::io::Result<ServeHandle> {
    let listener = tiny_http::Server::http(("127.0.0.1", port))
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let bound_port = match listener.server_addr() {
        tiny_http::ListenAddr::IP(addr) => addr.port(),
        _ => port,
    };
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let thread = std::thread::spawn(move || {
        while !stop_flag.load(Ordering::SeqCst) {
            let request = match listener.recv_timeout(std::time::Duration::from_millis(50)) {
                Ok(Some(r)) => r,
                Ok(None) => continue,
                Err(_) => break,
            };
            let mut request = request;
            let mut body = Vec::new();
            if request.as_reader().read_to_end(&mut body).is_err() {
                let _ = request.respond(tiny_http::Response::empty(400));
                continue;
            }
            let response_bytes = match super::envelope::decode_envelope(&body) {
                Ok(envelope) => super::envelope::encode_envelope(&server.handle(envelope)),
                Err(e) => {
                    // Undecodable body: transport-level failure.
                    let _ = request.respond(
                        tiny_http::Response::from_string(e.to_string()).with_status_code(400),
                    );
                    continue;
                }
            };
            let response = tiny_http::Response::from_data(response_bytes).with_header(
                tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                    .expect("static header"),
            );
            let _ = request.respond(response);
        }
    });
    Ok(ServeHandle {
        port: bound_port,
        stop,
        thread: Some(thread),
    })
}
