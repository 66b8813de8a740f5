//! Remote chat-completions backend over HTTP. Credentials come exclusively
//! from an environment variable, never from flags or config files.

use serde_json::{json, Value};

use super::{
    count_message_tokens, count_tokens, ChatBackend, ChatMessage, CompletionResult, GatewayError,
    Role, ToolCallSpec,
};

/// OpenAI-style chat-completions client. Requests are sent with
/// temperature 0 so repeated runs stay as comparable as the provider
/// allows.
pub struct RemoteBackend {
    endpoint: String,
    model: String,
    api_key: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    /// `key_env` names the environment variable holding the API key.
    pub fn new(endpoint: &str, model: &str, key_env: &str) -> Result<Self, GatewayError> {
        let api_key = std::env::var(key_env)
            .map_err(|_| GatewayError::MissingCredential(key_env.to_string()))?;
        Ok(RemoteBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(120))
                .build(),
        })
    }

    fn encode_message(message: &ChatMessage) -> Value {
        let role = match message.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        };
        let mut out = json!({ "role": role, "content": message.content });
        if !message.tool_calls.is_empty() {
            out["tool_calls"] = Value::Array(
                message
                    .tool_calls
                    .iter()
                    .map(|c| {
                        json!({
                            "id": c.id,
                            "type": "function",
                            "function": {
                                "name": c.tool_name,
                                "arguments": c.arguments.to_string(),
                            },
                        })
                    })
                    .collect(),
            );
        }
        if let Some(id) = &message.tool_call_id {
            out["tool_call_id"] = json!(id);
        }
        out
    }

    fn decode_message(value: &Value) -> ChatMessage {
        let content = value
            .get("content")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        let tool_calls = value
            .get("tool_calls")
            .and_then(Value::as_array)
            .map(|calls| {
                calls
                    .iter()
                    .filter_map(|c| {
                        let arguments = c
                            .pointer("/function/arguments")
                            .and_then(Value::as_str)
                            .and_then(|a| serde_json::from_str(a).ok())
                            .unwrap_or(Value::Null);
                        Some(ToolCallSpec {
                            id: c.get("id")?.as_str()?.to_string(),
                            tool_name: c.pointer("/function/name")?.as_str()?.to_string(),
                            arguments,
                        })
                    })
                    .collect()
            })
            .unwrap_or_default();
        ChatMessage {
            role: Role::Assistant,
            content,
            tool_calls,
            tool_call_id: None,
        }
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": messages.iter().map(Self::encode_message).collect::<Vec<_>>(),
        });
        let response = self
            .agent
            .post(&format!("{}/chat/completions", self.endpoint))
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| GatewayError::Backend(e.to_string()))?;
        let parsed: Value = response
            .into_json()
            .map_err(|e| GatewayError::Backend(e.to_string()))?;
        let choice = parsed
            .pointer("/choices/0/message")
            .ok_or_else(|| GatewayError::Backend("response has no choices".into()))?;
        let message = Self::decode_message(choice);
        let input_tokens = parsed
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .unwrap_or_else(|| count_message_tokens(messages));
        let output_tokens = parsed
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or_else(|| count_tokens(&message.content));
        Ok(CompletionResult {
            message,
            input_tokens,
            output_tokens,
        })
    }
}
