//! Serverless-style agentic workflow engine.
//!
//! The crate decomposes a ReAct-style workflow into three stateless agent
//! roles (Planner, Actor, Evaluator) orchestrated as a state machine over
//! MCP tool servers. Tool servers run behind a FaaS-like hosting shell with
//! content-hash invocation caching, blob-reference handling for large
//! payloads and per-invocation telemetry. Session memory is persisted per
//! invocation and re-injected under five configurations, and a deterministic
//! discrete-event simulator models singleton vs consolidated function
//! packing for cost and cold-start analysis.

pub mod agents;
pub mod fixtures;
pub mod gateway;
pub mod harness;
pub mod host;
pub mod mcp;
pub mod memory;
pub mod metrics;
pub mod orchestrator;
pub mod sim;

pub use host::{BlobRef, BlobStore, Clock, ManualClock, SystemClock};
pub use mcp::{ContentItem, ToolCallRequest, ToolCallResult, ToolDescriptor};
