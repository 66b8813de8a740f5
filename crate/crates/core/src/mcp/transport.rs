use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::envelope::{decode_envelope, encode_envelope, EnvelopeError, RpcEnvelope};

/// Transport-level failure, distinct from a tool error riding in the
/// envelope: the orchestrator may retry these, tool errors propagate to the
/// Actor's LLM loop.
#[derive(Debug, Error)]
pub enum TransportError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("http status {0}")]
    HttpStatus(u16),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

/// Anything that can answer one JSON-RPC envelope. Implemented by
/// [`crate::mcp::McpServer`]; kept as a trait so transports do not depend on
/// the server type.
pub trait EnvelopeHandler: Send + Sync {
    fn handle(&self, envelope: RpcEnvelope) -> RpcEnvelope;
}

/// A client-side channel carrying request envelopes to one server.
pub trait Transport: Send + Sync {
    fn roundtrip(&self, request: &RpcEnvelope) -> Result<RpcEnvelope, TransportError>;
}

/// Direct envelope hand-off to an in-process server. Same semantics as the
/// HTTP transport.
pub struct InProcessTransport {
    handler: Arc<dyn EnvelopeHandler>,
}

impl InProcessTransport {
    pub fn new(handler: Arc<dyn EnvelopeHandler>) -> Self {
        InProcessTransport { handler }
    }
}

impl Transport for InProcessTransport {
    fn roundtrip(&self, request: &RpcEnvelope) -> Result<RpcEnvelope, TransportError> {
        // Encode/decode even in-process so both transports exercise the same
        // wire representation.
        let bytes = encode_envelope(request);
        let decoded = decode_envelope(&bytes)?;
        let response = self.handler.handle(decoded);
        Ok(decode_envelope(&encode_envelope(&response))?)
    }
}

/// HTTP POST transport: one endpoint, JSON-RPC body both ways, status 200
/// for both tool success and tool error; non-200 only for transport-level
/// failure.
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: &str) -> Self {
        HttpTransport {
            url: url.to_string(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(900))
                .build(),
        }
    }
}

impl Transport for HttpTransport {
    fn roundtrip(&self, request: &RpcEnvelope) -> Result<RpcEnvelope, TransportError> {
        let body = encode_envelope(request);
        let response = self
            .agent
            .post(&self.url)
            .set("content-type", "application/json")
            .send_bytes(&body);
        match response {
            Ok(resp) => {
                let mut buf = Vec::new();
                resp.into_reader()
                    .read_to_end(&mut buf)
                    .map_err(|e| TransportError::Unreachable(e.to_string()))?;
                Ok(decode_envelope(&buf)?)
            }
            Err(ureq::Error::Status(code, _)) => Err(TransportError::HttpStatus(code)),
            Err(ureq::Error::Transport(t)) => Err(TransportError::Unreachable(t.to_string())),
        }
    }
}
