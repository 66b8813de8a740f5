//! Deterministic discrete-event simulator for tool-server deployments:
//! singleton functions (one per tool) versus a consolidated function
//! hosting all tools. Models cold starts, warm reuse, scale-out under
//! contention and idle expiry, and bills GB-seconds plus request fees.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures::default_exec_ms;
use crate::metrics::{compute_cost, FaasRates, MicroCents};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackingMode {
    Singleton,
    Consolidated,
}

impl PackingMode {
    pub fn label(&self) -> &'static str {
        match self {
            PackingMode::Singleton => "singleton",
            PackingMode::Consolidated => "consolidated",
        }
    }

    pub fn parse(s: &str) -> Option<PackingMode> {
        match s {
            "singleton" => Some(PackingMode::Singleton),
            "consolidated" => Some(PackingMode::Consolidated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub tool: String,
    pub memory_mb: u32,
    pub exec_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub memory_mb: u32,
    pub tools: Vec<ToolSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentPlan {
    pub mode: PackingMode,
    pub functions: Vec<FunctionSpec>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("duplicate tool name in deployment: {0}")]
    DuplicateTool(String),
    #[error("deployment needs at least one tool")]
    Empty,
}

/// Pack tools into functions. Consolidation sizes the shared function at
/// the largest constituent's memory.
pub fn build_plan(mode: PackingMode, tools: &[ToolSpec]) -> Result<DeploymentPlan, PlanError> {
    if tools.is_empty() {
        return Err(PlanError::Empty);
    }
    let mut seen = std::collections::BTreeSet::new();
    for tool in tools {
        if !seen.insert(tool.tool.clone()) {
            return Err(PlanError::DuplicateTool(tool.tool.clone()));
        }
    }
    let functions = match mode {
        PackingMode::Singleton => tools
            .iter()
            .map(|t| FunctionSpec {
                name: t.tool.clone(),
                memory_mb: t.memory_mb,
                tools: vec![t.clone()],
            })
            .collect(),
        PackingMode::Consolidated => vec![FunctionSpec {
            name: "consolidated".to_string(),
            memory_mb: tools.iter().map(|t| t.memory_mb).max().unwrap_or(128),
            tools: tools.to_vec(),
        }],
    };
    Ok(DeploymentPlan { mode, functions })
}

/// Closed-loop workload: each client cycles through the tool list at a
/// fixed request rate for the run duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub clients: u32,
    pub interarrival_ms: u64,
    pub duration_ms: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            clients: 8,
            interarrival_ms: 1000,
            duration_ms: 120_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub rng_seed: u64,
    /// Cold-start latency at 512 MB; scales linearly with function memory.
    pub cold_start_base_ms: u64,
    pub idle_timeout_ms: u64,
    /// Execution-time factor applied in consolidated mode: co-located
    /// tools skip cross-function blob round-trips.
    pub colocated_exec_factor: f64,
    /// Events at or after this time count toward the stable-phase average.
    pub stable_after_ms: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            rng_seed: 7,
            cold_start_base_ms: 800,
            idle_timeout_ms: 300_000,
            colocated_exec_factor: 0.6,
            stable_after_ms: 40_000,
        }
    }
}

pub fn cold_start_ms(memory_mb: u32, params: &SimParams) -> u64 {
    (params.cold_start_base_ms as u128 * memory_mb as u128 / 512) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t_ms: u64,
    pub client_id: u32,
    pub tool: String,
    pub latency_ms: u64,
    pub cold_start: bool,
    pub instance_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub name: String,
    pub memory_mb: u32,
    pub instances: u32,
    pub cold_starts: u64,
    pub busy_ms: u64,
    pub gb_seconds: f64,
    pub compute_cost_c: MicroCents,
    pub request_cost_c: MicroCents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub mode: PackingMode,
    pub events: u64,
    pub cold_starts: u64,
    pub gb_seconds: f64,
    pub total_cost_c: MicroCents,
    /// Mean billed cost of one call during the stable phase.
    pub stable_per_call_cost_c: MicroCents,
    pub mean_latency_ms: f64,
    pub functions: Vec<FunctionReport>,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub timeline: Vec<SimEvent>,
    pub summary: SimSummary,
}

struct Instance {
    id: String,
    busy_until: u64,
    expires_at: u64,
    busy_ms: u64,
    cold_starts: u64,
}

/// Run the workload against a deployment plan in virtual time. Instances
/// serve one request at a time; contention scales out, idleness expires.
pub fn simulate(
    plan: &DeploymentPlan,
    workload: &WorkloadSpec,
    params: &SimParams,
    rates: &FaasRates,
) -> SimOutcome {
    let mut tool_to_function: BTreeMap<&str, usize> = BTreeMap::new();
    for (index, function) in plan.functions.iter().enumerate() {
        for tool in &function.tools {
            tool_to_function.insert(&tool.tool, index);
        }
    }
    let exec_factor = match plan.mode {
        PackingMode::Singleton => 1.0,
        PackingMode::Consolidated => params.colocated_exec_factor,
    };
    let all_tools: Vec<&ToolSpec> = plan.functions.iter().flat_map(|f| &f.tools).collect();

    // Client start offsets are the only randomness; one seeded stream.
    let mut rng = ChaCha20Rng::seed_from_u64(params.rng_seed);
    let offsets: Vec<u64> = (0..workload.clients)
        .map(|_| rng.gen_range(0..workload.interarrival_ms.max(1)))
        .collect();

    // (time, client, seq, tool index)
    let mut requests: Vec<(u64, u32, u64, usize)> = Vec::new();
    for (client, offset) in offsets.iter().enumerate() {
        let mut seq = 0u64;
        loop {
            let t = offset + seq * workload.interarrival_ms;
            if t >= workload.duration_ms {
                break;
            }
            requests.push((t, client as u32, seq, (seq as usize) % all_tools.len()));
            seq += 1;
        }
    }
    requests.sort_by_key(|r| (r.0, r.1, r.2));

    let mut pools: Vec<Vec<Instance>> = plan.functions.iter().map(|_| Vec::new()).collect();
    let mut timeline = Vec::with_capacity(requests.len());
    for (t, client, _seq, tool_index) in requests {
        let tool = all_tools[tool_index];
        let function_index = tool_to_function[tool.tool.as_str()];
        let function = &plan.functions[function_index];
        let pool = &mut pools[function_index];
        let exec = ((tool.exec_ms as f64) * exec_factor).round() as u64;
        let warm = pool
            .iter_mut()
            .find(|i| i.busy_until <= t && i.expires_at > t);
        let (instance, cold) = match warm {
            Some(instance) => (instance, false),
            None => {
                let id = format!("{}-{}", function.name, pool.len());
                pool.push(Instance {
                    id,
                    busy_until: 0,
                    expires_at: 0,
                    busy_ms: 0,
                    cold_starts: 0,
                });
                (pool.last_mut().unwrap(), true)
            }
        };
        let latency = if cold {
            instance.cold_starts += 1;
            cold_start_ms(function.memory_mb, params) + exec
        } else {
            exec
        };
        instance.busy_until = t + latency;
        instance.busy_ms += latency;
        instance.expires_at = instance.busy_until + params.idle_timeout_ms;
        timeline.push(SimEvent {
            t_ms: t,
            client_id: client,
            tool: tool.tool.clone(),
            latency_ms: latency,
            cold_start: cold,
            instance_id: instance.id.clone(),
        });
    }

    let summary = summarize(plan, params, rates, &pools, &timeline);
    SimOutcome { timeline, summary }
}

fn summarize(
    plan: &DeploymentPlan,
    params: &SimParams,
    rates: &FaasRates,
    pools: &[Vec<Instance>],
    timeline: &[SimEvent],
) -> SimSummary {
    let mut functions = Vec::with_capacity(plan.functions.len());
    for (function, pool) in plan.functions.iter().zip(pools) {
        let busy_ms: u64 = pool.iter().map(|i| i.busy_ms).sum();
        let cold_starts: u64 = pool.iter().map(|i| i.cold_starts).sum();
        let gb_seconds = function.memory_mb as f64 / 1024.0 * busy_ms as f64 / 1000.0;
        let events = timeline
            .iter()
            .filter(|e| e.instance_id.starts_with(&format!("{}-", function.name)))
            .count() as i64;
        functions.push(FunctionReport {
            name: function.name.clone(),
            memory_mb: function.memory_mb,
            instances: pool.len() as u32,
            cold_starts,
            busy_ms,
            gb_seconds,
            compute_cost_c: compute_cost(function.memory_mb, busy_ms, rates),
            request_cost_c: MicroCents(events * rates.per_request.0),
        });
    }
    let total_cost_c = functions
        .iter()
        .map(|f| f.compute_cost_c + f.request_cost_c)
        .sum();
    let mut function_memory: BTreeMap<&str, u32> = BTreeMap::new();
    for f in &functions {
        function_memory.insert(f.name.as_str(), f.memory_mb);
    }
    let stable: Vec<&SimEvent> = timeline
        .iter()
        .filter(|e| e.t_ms >= params.stable_after_ms)
        .collect();
    let stable_per_call_cost_c = if stable.is_empty() {
        MicroCents::ZERO
    } else {
        let total: MicroCents = stable
            .iter()
            .map(|e| {
                let name = e.instance_id.rsplit_once('-').map(|(n, _)| n).unwrap_or("");
                let memory = function_memory.get(name).copied().unwrap_or(128);
                compute_cost(memory, e.latency_ms, rates) + rates.per_request
            })
            .sum();
        MicroCents(total.0 / stable.len() as i64)
    };
    let mean_latency_ms = if timeline.is_empty() {
        0.0
    } else {
        timeline.iter().map(|e| e.latency_ms as f64).sum::<f64>() / timeline.len() as f64
    };
    SimSummary {
        mode: plan.mode,
        events: timeline.len() as u64,
        cold_starts: functions.iter().map(|f| f.cold_starts).sum(),
        gb_seconds: functions.iter().map(|f| f.gb_seconds).sum(),
        total_cost_c,
        stable_per_call_cost_c,
        mean_latency_ms,
        functions,
    }
}

/// Tools of the research-summarization deployment.
pub fn research_tools() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            tool: "download_pdf".into(),
            memory_mb: 128,
            exec_ms: default_exec_ms("download_pdf"),
        },
        ToolSpec {
            tool: "summarize_text".into(),
            memory_mb: 400,
            exec_ms: default_exec_ms("summarize_text"),
        },
    ]
}

/// Tools of the log-analytics deployment.
pub fn log_tools() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            tool: "filter_by_keyword".into(),
            memory_mb: 200,
            exec_ms: default_exec_ms("filter_by_keyword"),
        },
        ToolSpec {
            tool: "mean".into(),
            memory_mb: 400,
            exec_ms: default_exec_ms("mean"),
        },
        ToolSpec {
            tool: "plot".into(),
            memory_mb: 400,
            exec_ms: default_exec_ms("plot"),
        },
    ]
}

pub fn write_timeline<W: Write>(timeline: &[SimEvent], sink: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(sink);
    for event in timeline {
        writer.serialize(event)?;
    }
    writer.flush().map_err(csv::Error::from)
}
