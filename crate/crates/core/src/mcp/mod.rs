//! MCP tool-calling data model, JSON-RPC 2.0 wire encoding and transports.

mod client;
mod envelope;
mod server;
mod transport;
mod types;

pub use client::{initialize_session, McpSession, SessionError, ToolRouter};
pub use envelope::{
    decode_envelope, encode_envelope, EnvelopeError, RpcEnvelope, RpcError, RpcId, RpcMethod,
    PROTOCOL_VERSION,
};
pub use server::{serve_http, McpServer, ServeHandle};
pub use transport::{HttpTransport, InProcessTransport, Transport, TransportError};
pub use types::{
    ContentItem, ParamSpec, ServerInfo, ToolCallRequest, ToolCallResult, ToolDescriptor,
};
