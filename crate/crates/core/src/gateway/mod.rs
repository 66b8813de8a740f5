//! Chat-completion gateway: message types, token accounting and the
//! pluggable backends (deterministic rule-based mock, record/replay, and a
//! remote HTTP endpoint).

mod mock;
mod remote;
mod scripted;

pub use mock::{RuleBasedMock, RuleSet};
pub use remote::RemoteBackend;
pub use scripted::{RecordingBackend, ScriptedBackend, TraceRecord};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// A tool call requested by the assistant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallSpec {
    pub id: String,
    pub tool_name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCallSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    fn plain(role: Role, content: &str) -> Self {
        ChatMessage {
            role,
            content: content.to_string(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn system(content: &str) -> Self {
        ChatMessage::plain(Role::System, content)
    }

    pub fn user(content: &str) -> Self {
        ChatMessage::plain(Role::User, content)
    }

    pub fn assistant(content: &str) -> Self {
        ChatMessage::plain(Role::Assistant, content)
    }

    pub fn assistant_tool_call(call: ToolCallSpec) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: String::new(),
            tool_calls: vec![call],
            tool_call_id: None,
        }
    }

    pub fn tool(tool_call_id: &str, content: &str) -> Self {
        ChatMessage {
            role: Role::Tool,
            content: content.to_string(),
            tool_calls: Vec::new(),
            tool_call_id: Some(tool_call_id.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub message: ChatMessage,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("replay failure: {0}")]
    Replay(String),
    #[error("missing credential: set {0}")]
    MissingCredential(String),
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError>;
}

/// Byte-based token estimate: one token per four UTF-8 bytes, rounded up.
pub fn count_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

/// Input-side estimate over a serialized message list.
pub fn count_message_tokens(messages: &[ChatMessage]) -> u64 {
    messages
        .iter()
        .map(|m| count_tokens(&serde_json::to_string(m).unwrap_or_default()))
        .sum()
}

/// Per-token prices in micro-cents (1e-6 cents).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelPricing {
    pub input_microcents_per_token: i64,
    pub output_microcents_per_token: i64,
}

impl Default for ModelPricing {
    /// $0.15 per million input tokens and $0.60 per million output tokens.
    fn default() -> Self {
        ModelPricing {
            input_microcents_per_token: 15,
            output_microcents_per_token: 60,
        }
    }
}
