//! Cost accounting and per-invocation report rows. Money is held in
//! integer micro-cents (1e-6 cents) end to end and only rendered to
//! fractional cents at the edges.

use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::gateway::ModelPricing;
use crate::host::InvocationTelemetry;
use crate::memory::MemoryConfig;
use crate::orchestrator::InvocationOutcome;

/// Integer money type: micro-cents. Renders as cents with four decimal
/// places.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct MicroCents(pub i64);

impl MicroCents {
    pub const ZERO: MicroCents = MicroCents(0);

    /// Cents with four decimal places, rounding half up on the last digit.
    pub fn render_cents(&self) -> String {
        let negative = self.0 < 0;
        let abs = self.0.unsigned_abs();
        // Four decimals of a cent = units of 100 micro-cents.
        let scaled = (abs + 50) / 100;
        let (whole, frac) = (scaled / 10_000, scaled % 10_000);
        if negative {
            format!("-{whole}.{frac:04}")
        } else {
            format!("{whole}.{frac:04}")
        }
    }

    pub fn parse_cents(s: &str) -> Option<MicroCents> {
        let (sign, rest) = match s.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1i64, s),
        };
        let (whole, frac) = rest.split_once('.').unwrap_or((rest, ""));
        let whole: i64 = whole.parse().ok()?;
        let mut micro = 0i64;
        let mut scale = 100_000i64;
        for ch in frac.chars() {
            let digit = ch.to_digit(10)? as i64;
            micro += digit * scale;
            scale /= 10;
        }
        Some(MicroCents(sign * (whole * 1_000_000 + micro)))
    }
}

impl std::ops::Add for MicroCents {
    type Output = MicroCents;
    fn add(self, rhs: MicroCents) -> MicroCents {
        MicroCents(self.0 + rhs.0)
    }
}

impl std::iter::Sum for MicroCents {
    fn sum<I: Iterator<Item = MicroCents>>(iter: I) -> MicroCents {
        MicroCents(iter.map(|m| m.0).sum())
    }
}

impl Serialize for MicroCents {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render_cents())
    }
}

impl<'de> Deserialize<'de> for MicroCents {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        MicroCents::parse_cents(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad money value {s:?}")))
    }
}

/// FaaS price card in micro-cents: per GB-second of compute, per request,
/// and per workflow state transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaasRates {
    pub per_gb_s: MicroCents,
    pub per_request: MicroCents,
    pub per_transition: MicroCents,
}

impl Default for FaasRates {
    fn default() -> Self {
        FaasRates {
            per_gb_s: MicroCents(1667),
            per_request: MicroCents(20),
            per_transition: MicroCents(2500),
        }
    }
}

pub fn llm_cost(input_tokens: u64, output_tokens: u64, pricing: &ModelPricing) -> MicroCents {
    MicroCents(
        input_tokens as i64 * pricing.input_microcents_per_token
            + output_tokens as i64 * pricing.output_microcents_per_token,
    )
}

/// Compute cost of one function slice, rounding to the nearest micro-cent.
pub fn compute_cost(memory_mb: u32, busy_ms: u64, rates: &FaasRates) -> MicroCents {
    let numerator = memory_mb as i128 * busy_ms as i128 * rates.per_gb_s.0 as i128;
    let denominator = 1024i128 * 1000;
    MicroCents(((numerator + denominator / 2) / denominator) as i64)
}

/// End-to-end FaaS cost of a workflow run: compute (GB-seconds), request
/// fees and state-machine transition fees.
pub fn workflow_faas_cost(
    gb_seconds: f64,
    requests: u64,
    transitions: u64,
    rates: &FaasRates,
) -> MicroCents {
    let compute = (gb_seconds * rates.per_gb_s.0 as f64).round() as i64;
    MicroCents(
        compute
            + requests as i64 * rates.per_request.0
            + transitions as i64 * rates.per_transition.0,
    )
}

/// Memory the agent functions run with, in MB.
pub const AGENT_MEMORY_MB: u32 = 512;

/// State-machine transitions of a typical three-role workflow run: entry
/// and exit plus one transition per role request over a short retry loop.
pub const DEFAULT_WORKFLOW_TRANSITIONS: u64 = 12;

/// Back-of-envelope agent bill for one workflow: three 512 MB function
/// requests totalling 50 s of busy time, stitched by the default number of
/// state transitions.
pub fn agent_compute_estimate(rates: &FaasRates) -> MicroCents {
    let gb_seconds = AGENT_MEMORY_MB as f64 / 1024.0 * 50.0;
    workflow_faas_cost(gb_seconds, 3, DEFAULT_WORKFLOW_TRANSITIONS, rates)
}

/// One CSV row of the run report; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub app: String,
    pub input: String,
    pub query: String,
    pub config: String,
    pub status: String,
    pub iterations: u32,
    pub planner_ms: u64,
    pub actor_llm_ms: u64,
    pub actor_mcp_ms: u64,
    pub actor_other_ms: u64,
    pub evaluator_ms: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub tool_calls: u64,
    pub cache_hits: u64,
    pub llm_cost_c: MicroCents,
    pub agent_faas_cost_c: MicroCents,
    pub mcp_faas_cost_c: MicroCents,
    pub total_cost_c: MicroCents,
}

pub const REPORT_COLUMNS: [&str; 19] = [
    "app",
    "input",
    "query",
    "config",
    "status",
    "iterations",
    "planner_ms",
    "actor_llm_ms",
    "actor_mcp_ms",
    "actor_other_ms",
    "evaluator_ms",
    "input_tokens",
    "output_tokens",
    "tool_calls",
    "cache_hits",
    "llm_cost_c",
    "agent_faas_cost_c",
    "mcp_faas_cost_c",
    "total_cost_c",
];

/// Agent-side FaaS accounting for one invocation: the three roles run as
/// functions (one request per role completion), stitched together by a
/// state machine with a transition per request plus entry and exit.
fn agent_faas_cost(outcome: &InvocationOutcome, rates: &FaasRates) -> MicroCents {
    let env = &outcome.envelope;
    let actor_supersteps = env
        .transcript
        .iter()
        .filter(|m| m.tool_call_id.is_none())
        .count() as u64;
    let requests = env.iteration_count as u64 * 2 + actor_supersteps;
    let transitions = requests + 2;
    let busy_ms = env.times.total_ms();
    compute_cost(AGENT_MEMORY_MB, busy_ms, rates)
        + MicroCents(requests as i64 * rates.per_request.0)
        + MicroCents(transitions as i64 * rates.per_transition.0)
}

/// Tool-side FaaS accounting from the telemetry the servers emitted during
/// this invocation.
pub fn mcp_faas_cost(telemetry: &[InvocationTelemetry], rates: &FaasRates) -> MicroCents {
    telemetry
        .iter()
        .map(|t| compute_cost(t.memory_mb, t.duration_ms, rates) + rates.per_request)
        .sum()
}

#[allow(clippy::too_many_arguments)]
pub fn report_row(
    app: &str,
    input: &str,
    query: &str,
    config: MemoryConfig,
    outcome: &InvocationOutcome,
    telemetry: &[InvocationTelemetry],
    pricing: &ModelPricing,
    rates: &FaasRates,
) -> ReportRow {
    let env = &outcome.envelope;
    let llm = llm_cost(env.input_tokens(), env.output_tokens(), pricing);
    let agent = agent_faas_cost(outcome, rates);
    let mcp = mcp_faas_cost(telemetry, rates);
    ReportRow {
        app: app.to_string(),
        input: input.to_string(),
        query: query.to_string(),
        config: config.label().to_string(),
        status: outcome.status.label().to_string(),
        iterations: env.iteration_count,
        planner_ms: env.times.planner_ms,
        actor_llm_ms: env.times.actor_llm_ms,
        actor_mcp_ms: env.times.actor_mcp_ms,
        actor_other_ms: env.times.actor_other_ms,
        evaluator_ms: env.times.evaluator_ms,
        input_tokens: env.input_tokens(),
        output_tokens: env.output_tokens(),
        tool_calls: env.tool_calls,
        cache_hits: env.cache_hits,
        llm_cost_c: llm,
        agent_faas_cost_c: agent,
        mcp_faas_cost_c: mcp,
        total_cost_c: llm + agent + mcp,
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("report format failure: {0}")]
    Csv(#[from] csv::Error),
}

pub fn write_report<W: Write>(rows: &[ReportRow], sink: W) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_writer(sink);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_report<R: Read>(source: R) -> Result<Vec<ReportRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(source);
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Field-wise mean over repeat runs of the same cell. Label fields come
/// from the first row; `iterations` and counters round to nearest.
pub fn mean_rows(rows: &[ReportRow]) -> Option<ReportRow> {
    let first = rows.first()?;
    let n = rows.len() as u64;
    let mean_u64 = |f: fn(&ReportRow) -> u64| (rows.iter().map(f).sum::<u64>() + n / 2) / n;
    let mean_money = |f: fn(&ReportRow) -> i64| {
        MicroCents((rows.iter().map(f).sum::<i64>() + n as i64 / 2) / n as i64)
    };
    Some(ReportRow {
        app: first.app.clone(),
        input: first.input.clone(),
        query: first.query.clone(),
        config: first.config.clone(),
        status: first.status.clone(),
        iterations: mean_u64(|r| r.iterations as u64) as u32,
        planner_ms: mean_u64(|r| r.planner_ms),
        actor_llm_ms: mean_u64(|r| r.actor_llm_ms),
        actor_mcp_ms: mean_u64(|r| r.actor_mcp_ms),
        actor_other_ms: mean_u64(|r| r.actor_other_ms),
        evaluator_ms: mean_u64(|r| r.evaluator_ms),
        input_tokens: mean_u64(|r| r.input_tokens),
        output_tokens: mean_u64(|r| r.output_tokens),
        tool_calls: mean_u64(|r| r.tool_calls),
        cache_hits: mean_u64(|r| r.cache_hits),
        llm_cost_c: mean_money(|r| r.llm_cost_c.0),
        agent_faas_cost_c: mean_money(|r| r.agent_faas_cost_c.0),
        mcp_faas_cost_c: mean_money(|r| r.mcp_faas_cost_c.0),
        total_cost_c: mean_money(|r| r.total_cost_c.0),
    })
}
