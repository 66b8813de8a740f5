use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::host::BlobRef;

/// Schema entry for a single tool parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(rename = "type")]
    pub type_tag: String,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub description: String,
}

/// Description of one tool as advertised by `tools/list`.
///
/// `input_schema` is keyed by parameter name; a `BTreeMap` keeps the
/// serialized order stable across calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub input_schema: BTreeMap<String, ParamSpec>,
}

impl ToolDescriptor {
    pub fn new(name: &str, description: &str) -> Self {
        ToolDescriptor {
            name: name.to_string(),
            description: description.to_string(),
            input_schema: BTreeMap::new(),
        }
    }

    pub fn param(mut self, name: &str, type_tag: &str, required: bool, description: &str) -> Self {
        self.input_schema.insert(
            name.to_string(),
            ParamSpec {
                type_tag: type_tag.to_string(),
                required,
                description: description.to_string(),
            },
        );
        self
    }
}

/// One `tools/call` request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRequest {
    pub request_id: String,
    pub tool_name: String,
    #[serde(default)]
    pub arguments: serde_json::Map<String, serde_json::Value>,
}

impl ToolCallRequest {
    pub fn new(request_id: &str, tool_name: &str, arguments: serde_json::Value) -> Self {
        let arguments = match arguments {
            serde_json::Value::Object(map) => map,
            serde_json::Value::Null => serde_json::Map::new(),
            other => {
                let mut map = serde_json::Map::new();
                map.insert("value".to_string(), other);
                map
            }
        };
        ToolCallRequest {
            request_id: request_id.to_string(),
            tool_name: tool_name.to_string(),
            arguments,
        }
    }
}

/// One item of tool output: inline text or a reference into the blob store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentItem {
    Text { text: String },
    Blob { blob: BlobRef },
}

impl ContentItem {
    pub fn text(s: impl Into<String>) -> Self {
        ContentItem::Text { text: s.into() }
    }

    pub fn blob(b: BlobRef) -> Self {
        ContentItem::Blob { blob: b }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ContentItem::Text { text } => Some(text),
            ContentItem::Blob { .. } => None,
        }
    }

    pub fn as_blob(&self) -> Option<&BlobRef> {
        match self {
            ContentItem::Blob { blob } => Some(blob),
            ContentItem::Text { .. } => None,
        }
    }
}

/// Result of one `tools/call`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallResult {
    pub request_id: String,
    pub content: Vec<ContentItem>,
    pub is_error: bool,
    pub duration_ms: u64,
    pub cache_hit: bool,
}

impl ToolCallResult {
    pub fn error(request_id: &str, message: impl Into<String>) -> Self {
        ToolCallResult {
            request_id: request_id.to_string(),
            content: vec![ContentItem::text(message)],
            is_error: true,
            duration_ms: 0,
            cache_hit: false,
        }
    }

    /// Concatenated inline text content, used for transcripts and summaries.
    pub fn text(&self) -> String {
        self.content
            .iter()
            .filter_map(|c| c.as_text())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Server identity returned by `initialize`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerInfo {
    pub name: String,
    pub version: String,
    /// Capability flags; only `tools` is meaningful here.
    #[serde(default)]
    pub capabilities: BTreeMap<String, bool>,
}

impl ServerInfo {
    pub fn new(name: &str, version: &str) -> Self {
        let mut capabilities = BTreeMap::new();
        capabilities.insert("tools".to_string(), true);
        ServerInfo {
            name: name.to_string(),
            version: version.to_string(),
            capabilities,
        }
    }
}
