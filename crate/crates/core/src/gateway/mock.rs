//! Deterministic rule-based stand-in for a chat model. It plays all three
//! workflow roles, keyed off markers in the system prompt, and drives tool
//! use from a declarative rule set per application.

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    count_message_tokens, count_tokens, ChatBackend, ChatMessage, CompletionResult, GatewayError,
    Role, ToolCallSpec,
};
use crate::host::canonical_json;

#[derive(Debug, Clone, Deserialize)]
struct CaptureSpec {
    name: String,
    pattern: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanStepSpec {
    pub tool: String,
    pub args: Value,
}

#[derive(Debug, Clone, Deserialize)]
struct RuleSpec {
    query_pattern: String,
    steps: Vec<PlanStepSpec>,
    final_response: String,
}

/// Declarative strategy for one application: how to pull entities out of
/// the visible context and which tool pipeline answers which query shape.
#[derive(Debug, Clone, Deserialize)]
pub struct RuleSet {
    captures: Vec<CaptureSpec>,
    rules: Vec<RuleSpec>,
}

impl RuleSet {
    pub fn parse(json: &str) -> Result<RuleSet, serde_json::Error> {
        serde_json::from_str(json)
    }

    /// Rules for the research-summarization application.
    pub fn research() -> RuleSet {
        RuleSet::parse(include_str!("rules/research.json")).expect("bundled rules are valid")
    }

    /// Rules for the log-analytics application.
    pub fn logs() -> RuleSet {
        RuleSet::parse(include_str!("rules/logs.json")).expect("bundled rules are valid")
    }
}

/// A prior tool result visible in the conversation (live transcript or
/// injected session memory).
#[derive(Debug, Clone)]
struct ToolRecord {
    tool: String,
    args: Value,
    is_error: bool,
    value: Value,
    text: String,
}

pub struct RuleBasedMock {
    captures: Vec<(String, Regex)>,
    rules: Vec<(Regex, RuleSpec)>,
}

impl RuleBasedMock {
    pub fn new(rule_set: RuleSet) -> Self {
        let captures = rule_set
            .captures
            .iter()
            .map(|c| (c.name.clone(), Regex::new(&c.pattern).expect("valid capture pattern")))
            .collect();
        let rules = rule_set
            .rules
            .into_iter()
            .map(|r| (Regex::new(&r.query_pattern).expect("valid query pattern"), r))
            .collect();
        RuleBasedMock { captures, rules }
    }

    fn captures_from(&self, context: &str) -> Map<String, Value> {
        let mut out = Map::new();
        for (name, regex) in &self.captures {
            if let Some(m) = regex.captures(context).and_then(|c| c.get(1)) {
                out.insert(name.clone(), Value::String(m.as_str().to_string()));
            }
        }
        out
    }

    fn matching_rule(&self, request: &str) -> Option<&RuleSpec> {
        self.rules
            .iter()
            .find(|(regex, _)| regex.is_match(request))
            .map(|(_, rule)| rule)
    }

    fn complete_planner(
        &self,
        messages: &[ChatMessage],
        request: &str,
        captures: &Map<String, Value>,
    ) -> ChatMessage {
        let plan = match self.matching_rule(request) {
            Some(rule) => {
                let steps: Vec<Value> = rule
                    .steps
                    .iter()
                    .map(|s| {
                        serde_json::json!({
                            "tool": s.tool,
                            // Entities resolve at plan time; step outputs
                            // stay as placeholders for the actor.
                            "args": substitute(&s.args, captures, &[]),
                        })
                    })
                    .collect();
                serde_json::json!({
                    "tools_to_use": steps,
                    "reasoning": format!(
                        "Apply the {}-step pipeline for this request.",
                        rule.steps.len()
                    ),
                })
            }
            None => serde_json::json!({
                "tools_to_use": [],
                "reasoning": "no applicable strategy for this request",
            }),
        };
        let _ = messages;
        ChatMessage::assistant(&serde_json::to_string(&plan).unwrap())
    }

    fn complete_actor(
        &self,
        messages: &[ChatMessage],
        request: &str,
        captures: &Map<String, Value>,
        records: &[ToolRecord],
    ) -> ChatMessage {
        let system = messages
            .iter()
            .find(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let steps = plan_steps(system);
        for step in &steps {
            let resolved = match substitute_checked(&step.args, captures, records) {
                Some(v) => v,
                // An unresolvable dependency: its producing step comes
                // earlier in the plan and is handled there.
                None => continue,
            };
            if find_record(records, &step.tool, &resolved, false).is_some() {
                continue;
            }
            if let Some(failed) = find_record(records, &step.tool, &resolved, true) {
                return ChatMessage::assistant(&format!(
                    "Unable to complete the plan: {} failed: {}",
                    step.tool, failed.text
                ));
            }
            let id = format!(
                "call_{}",
                messages.iter().filter(|m| !m.tool_calls.is_empty()).count() + 1
            );
            return ChatMessage::assistant_tool_call(ToolCallSpec {
                id,
                tool_name: step.tool.clone(),
                arguments: resolved,
            });
        }
        // Every step is satisfied (or the plan is empty): produce the final
        // answer for the user.
        let content = match self.matching_rule(request) {
            Some(rule) => value_to_text(&substitute(
                &Value::String(rule.final_response.clone()),
                captures,
                records,
            )),
            None => "No action was required for this request.".to_string(),
        };
        ChatMessage::assistant(&content)
    }

    fn complete_evaluator(
        &self,
        messages: &[ChatMessage],
        captures: &Map<String, Value>,
        records: &[ToolRecord],
    ) -> ChatMessage {
        let system = messages
            .iter()
            .find(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let steps = plan_steps(system);
        let mut missing: Vec<&str> = Vec::new();
        for step in &steps {
            let satisfied = substitute_checked(&step.args, captures, records)
                .map(|resolved| find_record(records, &step.tool, &resolved, false).is_some())
                .unwrap_or(false);
            if !satisfied {
                missing.push(&step.tool);
            }
        }
        let verdict = if missing.is_empty() {
            serde_json::json!({
                "success": true,
                "needs_retry": false,
                "reason": "all planned steps produced results",
                "feedback": "",
            })
        } else {
            serde_json::json!({
                "success": false,
                "needs_retry": true,
                "reason": format!("missing successful results for: {}", missing.join(", ")),
                "feedback": format!("retry the failed steps: {}", missing.join(", ")),
            })
        };
        ChatMessage::assistant(&serde_json::to_string(&verdict).unwrap())
    }
}

impl ChatBackend for RuleBasedMock {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError> {
        let input_tokens = count_message_tokens(messages);
        let system = messages
            .iter()
            .find(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let context: String = messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let captures = self.captures_from(&context);
        let request = current_request(messages);
        let records = tool_records(messages);

        let message = if system.contains("You are the Planner") {
            self.complete_planner(messages, &request, &captures)
        } else if system.contains("You are the Actor") {
            self.complete_actor(messages, &request, &captures, &records)
        } else if system.contains("You are the Evaluator") {
            self.complete_evaluator(messages, &captures, &records)
        } else {
            ChatMessage::assistant("This mock only serves planner, actor and evaluator prompts.")
        };
        let output_tokens = count_tokens(&serde_json::to_string(&message).unwrap_or_default());
        Ok(CompletionResult {
            message,
            input_tokens,
            output_tokens,
        })
    }
}

/// The active query: the `Request:` line of the last user message.
fn current_request(messages: &[ChatMessage]) -> String {
    let last_user = messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("");
    for line in last_user.lines() {
        if let Some(rest) = line.strip_prefix("Request:") {
            return rest.trim().to_string();
        }
    }
    last_user.to_string()
}

/// Parse every tool-role message into a structured record. Contents are
/// JSON-shaped `{"tool", "args", "result": {"is_error", "content"}}`.
fn tool_records(messages: &[ChatMessage]) -> Vec<ToolRecord> {
    let mut records = Vec::new();
    for message in messages.iter().filter(|m| m.role == Role::Tool) {
        let Ok(parsed) = serde_json::from_str::<Value>(&message.content) else {
            continue;
        };
        let Some(tool) = parsed.get("tool").and_then(Value::as_str) else {
            continue;
        };
        let args = parsed.get("args").cloned().unwrap_or(Value::Null);
        let result = parsed.get("result").cloned().unwrap_or(Value::Null);
        let is_error = result
            .get("is_error")
            .and_then(Value::as_bool)
            .unwrap_or(false);
        let first = result
            .get("content")
            .and_then(Value::as_array)
            .and_then(|c| c.first())
            .cloned()
            .unwrap_or(Value::Null);
        let (value, text) = match first.get("type").and_then(Value::as_str) {
            Some("text") => {
                let text = first
                    .get("text")
                    .and_then(Value::as_str)
                    .unwrap_or("")
                    .to_string();
                (Value::String(text.clone()), text)
            }
            Some("blob") => {
                let uri = first
                    .pointer("/blob/uri")
                    .and_then(Value::as_str)
                    .unwrap_or("")
                    .to_string();
                (serde_json::json!({ "$blob": uri }), uri)
            }
            _ => (Value::Null, String::new()),
        };
        records.push(ToolRecord {
            tool: tool.to_string(),
            args,
            is_error,
            value,
            text,
        });
    }
    records
}

fn find_record<'a>(
    records: &'a [ToolRecord],
    tool: &str,
    resolved_args: &Value,
    errored: bool,
) -> Option<&'a ToolRecord> {
    let wanted = canonical_json(resolved_args).ok()?;
    records.iter().rev().find(|r| {
        r.tool == tool
            && r.is_error == errored
            && canonical_json(&r.args).map(|c| c == wanted).unwrap_or(false)
    })
}

fn latest_output<'a>(records: &'a [ToolRecord], tool: &str) -> Option<&'a ToolRecord> {
    records.iter().rev().find(|r| r.tool == tool && !r.is_error)
}

/// Substitute `{name}` captures and `{output:tool}` references in a value.
/// Whole-string placeholders are replaced by the referenced value (so blob
/// wrappers survive); embedded placeholders substitute textually. Unknown
/// placeholders stay literal.
fn substitute(value: &Value, captures: &Map<String, Value>, records: &[ToolRecord]) -> Value {
    match value {
        Value::String(s) => substitute_string(s, captures, records),
        Value::Array(items) => Value::Array(
            items
                .iter()
                .map(|v| substitute(v, captures, records))
                .collect(),
        ),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| {
                    let key = value_to_text(&substitute_string(k, captures, records));
                    (key, substitute(v, captures, records))
                })
                .collect(),
        ),
        other => other.clone(),
    }
}

/// Like `substitute`, but reports `None` when an `{output:tool}` reference
/// has no successful record yet.
fn substitute_checked(
    value: &Value,
    captures: &Map<String, Value>,
    records: &[ToolRecord],
) -> Option<Value> {
    for reference in output_references(value) {
        latest_output(records, &reference)?;
    }
    Some(substitute(value, captures, records))
}

fn output_references(value: &Value) -> Vec<String> {
    let mut out = Vec::new();
    collect_output_references(value, &mut out);
    out
}

fn collect_output_references(value: &Value, out: &mut Vec<String>) {
    match value {
        Value::String(s) => {
            let regex = output_regex();
            for c in regex.captures_iter(s) {
                out.push(c[1].to_string());
            }
        }
        Value::Array(items) => items.iter().for_each(|v| collect_output_references(v, out)),
        Value::Object(map) => map.values().for_each(|v| collect_output_references(v, out)),
        _ => {}
    }
}

fn output_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{output:([A-Za-z0-9_]+)\}").unwrap())
}

fn capture_regex() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z0-9_]+)\}").unwrap())
}

fn substitute_string(s: &str, captures: &Map<String, Value>, records: &[ToolRecord]) -> Value {
    // Whole-string output placeholder: keep the structured value.
    if let Some(c) = output_regex().captures(s) {
        if c.get(0).unwrap().as_str() == s {
            if let Some(record) = latest_output(records, &c[1]) {
                return record.value.clone();
            }
            return Value::String(s.to_string());
        }
    }
    let mut text = output_regex()
        .replace_all(s, |c: &regex::Captures<'_>| {
            latest_output(records, &c[1])
                .map(|r| r.text.clone())
                .unwrap_or_else(|| c[0].to_string())
        })
        .into_owned();
    text = capture_regex()
        .replace_all(&text, |c: &regex::Captures<'_>| {
            captures
                .get(&c[1])
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| c[0].to_string())
        })
        .into_owned();
    Value::String(text)
}

fn value_to_text(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Extract the plan embedded in a prompt: the first balanced JSON object
/// containing a `tools_to_use` list.
fn plan_steps(prompt: &str) -> Vec<PlanStepSpec> {
    for (start, _) in prompt.match_indices('{') {
        let Some(object) = balanced_object(&prompt[start..]) else {
            continue;
        };
        let Ok(parsed) = serde_json::from_str::<Value>(object) else {
            continue;
        };
        if let Some(steps) = parsed.get("tools_to_use").and_then(Value::as_array) {
            return steps
                .iter()
                .filter_map(|s| serde_json::from_value(s.clone()).ok())
                .collect();
        }
    }
    Vec::new()
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
