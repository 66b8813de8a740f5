//! The three stateless agent roles (Planner, Actor, Evaluator) and the
//! workflow envelope that carries one invocation's state between them.
//! Each role is a pure step: prompt in, message out, envelope mutated.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::gateway::{ChatBackend, ChatMessage, GatewayError, ToolCallSpec};
use crate::host::Clock;
use crate::mcp::{SessionError, ToolCallRequest, ToolCallResult, ToolDescriptor, ToolRouter};

pub const MAX_ITERATIONS: u32 = 3;
pub const SUPERSTEP_CAP: u32 = 25;

/// Nominal per-completion latencies charged against virtual clocks.
const PLANNER_LLM_MS: u64 = 400;
const ACTOR_LLM_MS: u64 = 350;
const EVALUATOR_LLM_MS: u64 = 250;
const ACTOR_OTHER_MS: u64 = 5;

const PLANNER_PROMPT: &str = include_str!("prompts/planner.txt");
const ACTOR_PROMPT: &str = include_str!("prompts/actor.txt");
const ACTOR_MEMORY_PROMPT: &str = include_str!("prompts/actor_memory.txt");
const EVALUATOR_PROMPT: &str = include_str!("prompts/evaluator.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub tool: String,
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub tools_to_use: Vec<PlanStep>,
    #[serde(default)]
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub success: bool,
    pub needs_retry: bool,
    #[serde(default)]
    pub reason: String,
    #[serde(default)]
    pub feedback: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPair {
    pub input: u64,
    pub output: u64,
}

impl TokenPair {
    fn add(&mut self, input: u64, output: u64) {
        self.input += input;
        self.output += output;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimes {
    pub planner_ms: u64,
    pub actor_llm_ms: u64,
    pub actor_mcp_ms: u64,
    pub actor_other_ms: u64,
    pub evaluator_ms: u64,
}

impl StageTimes {
    pub fn total_ms(&self) -> u64 {
        self.planner_ms
            + self.actor_llm_ms
            + self.actor_mcp_ms
            + self.actor_other_ms
            + self.evaluator_ms
    }
}

/// Mutable state of one invocation as it moves through the role pipeline.
#[derive(Debug, Clone)]
pub struct WorkflowEnvelope {
    pub session_id: String,
    pub invocation_id: String,
    pub user_request: String,
    /// Rendered client-side memory block; empty when disabled.
    pub client_memory_block: String,
    /// Evaluator feedback from the previous iteration, if any.
    pub feedback: Option<String>,
    /// Messages injected from the session memory store.
    pub injected_memory: Vec<ChatMessage>,
    pub plan: Option<Plan>,
    /// Messages this invocation produced (across all its iterations).
    pub transcript: Vec<ChatMessage>,
    pub evaluation: Option<Evaluation>,
    pub iteration_count: u32,
    pub actor_truncated: bool,
    pub final_response: Option<String>,
    pub planner_tokens: TokenPair,
    pub actor_tokens: TokenPair,
    pub evaluator_tokens: TokenPair,
    pub times: StageTimes,
    pub tool_calls: u64,
    pub cache_hits: u64,
}

impl WorkflowEnvelope {
    pub fn new(session_id: &str, invocation_id: &str, user_request: &str) -> Self {
        WorkflowEnvelope {
            session_id: session_id.to_string(),
            invocation_id: invocation_id.to_string(),
            user_request: user_request.to_string(),
            client_memory_block: String::new(),
            feedback: None,
            injected_memory: Vec::new(),
            plan: None,
            transcript: Vec::new(),
            evaluation: None,
            iteration_count: 0,
            actor_truncated: false,
            final_response: None,
            planner_tokens: TokenPair::default(),
            actor_tokens: TokenPair::default(),
            evaluator_tokens: TokenPair::default(),
            times: StageTimes::default(),
            tool_calls: 0,
            cache_hits: 0,
        }
    }

    pub fn input_tokens(&self) -> u64 {
        self.planner_tokens.input + self.actor_tokens.input + self.evaluator_tokens.input
    }

    pub fn output_tokens(&self) -> u64 {
        self.planner_tokens.output + self.actor_tokens.output + self.evaluator_tokens.output
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("planner produced no parseable plan: {0}")]
    PlanParse(String),
}

/// Shared dependencies for one role step.
pub struct AgentContext<'a> {
    pub gateway: &'a dyn ChatBackend,
    pub router: &'a ToolRouter,
    pub clock: &'a dyn Clock,
    /// Whether agent-side session memory is active (changes the actor
    /// prompt and the injected context).
    pub agent_memory: bool,
    /// Retry budget for the plan/act/evaluate loop.
    pub max_iterations: u32,
    /// Upper bound on actor supersteps per run.
    pub superstep_cap: u32,
}

impl AgentContext<'_> {
    /// Charge one LLM completion: nominal time on virtual clocks, measured
    /// wall time otherwise.
    fn charge_llm<T>(
        &self,
        nominal_ms: u64,
        f: impl FnOnce() -> Result<T, GatewayError>,
    ) -> Result<(T, u64), GatewayError> {
        let started = std::time::Instant::now();
        let out = f()?;
        let elapsed = if self.clock.is_virtual() {
            nominal_ms
        } else {
            (started.elapsed().as_millis() as u64).max(1)
        };
        self.clock.advance_ms(elapsed);
        Ok((out, elapsed))
    }
}

pub fn tools_description(descriptors: &[ToolDescriptor]) -> String {
    descriptors
        .iter()
        .map(|d| {
            let params: Vec<String> = d
                .input_schema
                .iter()
                .map(|(name, spec)| {
                    if spec.required {
                        format!("{name}: {}", spec.type_tag)
                    } else {
                        format!("{name}?: {}", spec.type_tag)
                    }
                })
                .collect();
            format!("- {}: {} (args: {})", d.name, d.description, params.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn request_block(env: &WorkflowEnvelope) -> String {
    let mut block = format!("Request: {}", env.user_request);
    if !env.client_memory_block.is_empty() {
        block.push_str("\n\n");
        block.push_str(&env.client_memory_block);
    }
    if let Some(feedback) = &env.feedback {
        block.push_str("\n\nPrevious attempt feedback: ");
        block.push_str(feedback);
    }
    block
}

fn plan_json(env: &WorkflowEnvelope) -> String {
    env.plan
        .as_ref()
        .map(|p| serde_json::to_string(p).unwrap_or_default())
        .unwrap_or_else(|| "{\"tools_to_use\": [], \"reasoning\": \"\"}".to_string())
}

pub fn planner_messages(
    env: &WorkflowEnvelope,
    descriptors: &[ToolDescriptor],
) -> Vec<ChatMessage> {
    let system = PLANNER_PROMPT.replace("{tools_description}", &tools_description(descriptors));
    let mut messages = vec![ChatMessage::system(&system)];
    messages.extend(env.injected_memory.iter().cloned());
    messages.push(ChatMessage::user(&request_block(env)));
    messages
}

pub fn actor_messages(
    env: &WorkflowEnvelope,
    descriptors: &[ToolDescriptor],
    agent_memory: bool,
) -> Vec<ChatMessage> {
    let mut system = ACTOR_PROMPT
        .replace("{plan_json}", &plan_json(env))
        .replace("{tools_description}", &tools_description(descriptors));
    if agent_memory {
        system.push('\n');
        system.push_str(ACTOR_MEMORY_PROMPT);
    }
    let mut messages = vec![ChatMessage::system(&system)];
    messages.extend(env.injected_memory.iter().cloned());
    messages.push(ChatMessage::user(&request_block(env)));
    messages.extend(env.transcript.iter().cloned());
    messages
}

pub fn evaluator_messages(env: &WorkflowEnvelope, max_iterations: u32) -> Vec<ChatMessage> {
    let results: Vec<Value> = env
        .transcript
        .iter()
        .filter(|m| m.tool_call_id.is_some())
        .filter_map(|m| serde_json::from_str::<Value>(&m.content).ok())
        .map(|v| {
            serde_json::json!({
                "tool": v.get("tool").cloned().unwrap_or(Value::Null),
                "is_error": v.pointer("/result/is_error").cloned().unwrap_or(Value::Null),
            })
        })
        .collect();
    let system = EVALUATOR_PROMPT
        .replace("{plan_json}", &plan_json(env))
        .replace("{iteration_count}", &env.iteration_count.to_string())
        .replace("{max_iterations}", &max_iterations.to_string())
        .replace(
            "{result_json}",
            &serde_json::to_string(&results).unwrap_or_default(),
        );
    let mut messages = vec![ChatMessage::system(&system)];
    messages.extend(env.injected_memory.iter().cloned());
    messages.push(ChatMessage::user(&request_block(env)));
    messages.extend(env.transcript.iter().cloned());
    messages
}

/// Transcript encoding of one tool result, embedding enough structure for
/// later roles (and later invocations) to recognize the call.
pub fn tool_message_content(tool: &str, args: &Value, result: &ToolCallResult) -> String {
    serde_json::json!({
        "tool": tool,
        "args": args,
        "result": {
            "is_error": result.is_error,
            "content": result.content,
        },
    })
    .to_string()
}

/// First balanced JSON object in `text` that contains `required_key`.
/// Tolerates surrounding prose and fenced code blocks.
pub fn extract_json_object(text: &str, required_key: &str) -> Option<Value> {
    for (start, _) in text.match_indices('{') {
        let Some(candidate) = balanced_object(&text[start..]) else {
            continue;
        };
        if let Ok(value) = serde_json::from_str::<Value>(candidate) {
            if value.get(required_key).is_some() {
                return Some(value);
            }
        }
    }
    None
}

fn balanced_object(s: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, ch) in s.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Run the Planner role: one completion, one re-prompt on unparseable
/// output, then hard failure.
pub fn run_planner(ctx: &AgentContext<'_>, env: &mut WorkflowEnvelope) -> Result<(), AgentError> {
    let descriptors = ctx.router.descriptors().to_vec();
    let mut messages = planner_messages(env, &descriptors);
    for attempt in 0..2 {
        let (completion, elapsed) =
            ctx.charge_llm(PLANNER_LLM_MS, || ctx.gateway.complete(&messages))?;
        env.times.planner_ms += elapsed;
        env.planner_tokens
            .add(completion.input_tokens, completion.output_tokens);
        let content = completion.message.content.clone();
        if let Some(plan) = extract_json_object(&content, "tools_to_use")
            .and_then(|v| serde_json::from_value::<Plan>(v).ok())
        {
            env.plan = Some(plan);
            return Ok(());
        }
        if attempt == 0 {
            messages.push(completion.message);
            messages.push(ChatMessage::user(
                "Your previous reply was not a valid JSON plan. Respond with only the JSON \
                 object, no prose.",
            ));
        } else {
            return Err(AgentError::PlanParse(content));
        }
    }
    unreachable!("loop returns on both branches");
}

/// Run the Actor role until it produces a final answer or hits the
/// superstep cap. Returns whether a final answer was produced.
pub fn run_actor(ctx: &AgentContext<'_>, env: &mut WorkflowEnvelope) -> Result<bool, AgentError> {
    let descriptors = ctx.router.descriptors().to_vec();
    for _superstep in 0..ctx.superstep_cap {
        let messages = actor_messages(env, &descriptors, ctx.agent_memory);
        let (completion, elapsed) =
            ctx.charge_llm(ACTOR_LLM_MS, || ctx.gateway.complete(&messages))?;
        env.times.actor_llm_ms += elapsed;
        env.actor_tokens
            .add(completion.input_tokens, completion.output_tokens);
        if ctx.clock.is_virtual() {
            ctx.clock.advance_ms(ACTOR_OTHER_MS);
            env.times.actor_other_ms += ACTOR_OTHER_MS;
        }
        let message = completion.message;
        if message.tool_calls.is_empty() {
            env.final_response = Some(message.content.clone());
            env.transcript.push(message);
            return Ok(true);
        }
        let call = message.tool_calls[0].clone();
        env.transcript.push(message);
        let result = call_with_retry(ctx, env, &call)?;
        env.tool_calls += 1;
        if result.cache_hit {
            env.cache_hits += 1;
        }
        env.times.actor_mcp_ms += result.duration_ms;
        let content = tool_message_content(&call.tool_name, &call.arguments, &result);
        env.transcript.push(ChatMessage::tool(&call.id, &content));
    }
    env.actor_truncated = true;
    Ok(false)
}

/// Transport-level failures get one retry; tool errors pass through in the
/// result envelope and are never retried here.
fn call_with_retry(
    ctx: &AgentContext<'_>,
    env: &WorkflowEnvelope,
    call: &ToolCallSpec,
) -> Result<ToolCallResult, AgentError> {
    let request_id = format!(
        "{}-{}-{:03}",
        env.session_id,
        env.invocation_id,
        env.tool_calls + 1
    );
    let req = ToolCallRequest::new(&request_id, &call.tool_name, call.arguments.clone());
    match ctx.router.call(&req) {
        Ok(result) => Ok(result),
        Err(_) => Ok(ctx.router.call(&req)?),
    }
}

/// Run the Evaluator role. Parse failures evaluate to a terminal failure,
/// and `needs_retry` is clamped once the iteration budget is spent.
pub fn run_evaluator(ctx: &AgentContext<'_>, env: &mut WorkflowEnvelope) -> Result<(), AgentError> {
    let messages = evaluator_messages(env, ctx.max_iterations);
    let (completion, elapsed) =
        ctx.charge_llm(EVALUATOR_LLM_MS, || ctx.gateway.complete(&messages))?;
    env.times.evaluator_ms += elapsed;
    env.evaluator_tokens
        .add(completion.input_tokens, completion.output_tokens);
    let mut evaluation = extract_json_object(&completion.message.content, "success")
        .and_then(|v| serde_json::from_value::<Evaluation>(v).ok())
        .unwrap_or(Evaluation {
            success: false,
            needs_retry: false,
            reason: "evaluator parse failure".to_string(),
            feedback: String::new(),
        });
    if env.iteration_count >= ctx.max_iterations {
        evaluation.needs_retry = false;
    }
    env.evaluation = Some(evaluation);
    Ok(())
}
