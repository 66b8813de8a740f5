//! Acceptance suite. Ten checks cover the configuration-matrix behavior,
//! tool-call and token reductions, cache and memory-store laws, the
//! workflow state-machine bounds, the cost model, the deployment
//! simulator, calculator correctness and protocol conformance. One
//! PASS/FAIL line is printed per check.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use serde_json::{json, Map, Value};

use fame_core::agents::{
    run_evaluator, AgentContext, WorkflowEnvelope, MAX_ITERATIONS, SUPERSTEP_CAP,
};
use fame_core::fixtures::{build_server, Corpus, FixtureServer, FixtureShared};
use fame_core::gateway::{
    ChatBackend, ChatMessage, CompletionResult, GatewayError, ModelPricing, RuleBasedMock,
    RuleSet, ToolCallSpec,
};
use fame_core::harness::{build_engine, inputs, run_cell, session_queries, AppKind};
use fame_core::host::{
    cache_key, HandlerError, HostContext, HostSettings, HostedTool, ManualClock, ToolHost, Ttl,
};
use fame_core::mcp::{
    decode_envelope, encode_envelope, initialize_session, serve_http, HttpTransport,
    InProcessTransport, RpcEnvelope, RpcId, RpcMethod, ToolCallRequest, ToolDescriptor,
};
use fame_core::memory::{
    persist_invocation, session_messages, FileStore, InMemoryStore, MemoryConfig, MemoryError,
    MemoryStore,
};
use fame_core::metrics::{agent_compute_estimate, llm_cost, FaasRates, MicroCents, ReportRow};
use fame_core::orchestrator::InvocationStatus;
use fame_core::sim::{build_plan, log_tools, research_tools, simulate, write_timeline, PackingMode, SimParams, WorkloadSpec};
use fame_core::ContentItem;

// ---------------------------------------------------------------------------
// Shared matrix run feeding checks 1-3.

struct Cell {
    app: AppKind,
    input: String,
    config: &'static str,
    rows: Vec<ReportRow>,
}

struct MatrixData {
    elapsed: Duration,
    cells: Vec<Cell>,
}

impl MatrixData {
    fn cell(&self, app: AppKind, input: &str, config: &str) -> &Cell {
        self.cells
            .iter()
            .find(|c| c.app == app && c.input == input && c.config == config)
            .expect("cell present")
    }

    fn tool_calls(&self, app: AppKind, input: &str, config: &str) -> u64 {
        self.cell(app, input, config)
            .rows
            .iter()
            .map(|r| r.tool_calls)
            .sum()
    }

    fn input_tokens(&self, app: AppKind, input: &str, config: &str) -> u64 {
        self.cell(app, input, config)
            .rows
            .iter()
            .map(|r| r.input_tokens)
            .sum()
    }
}

fn run_full_matrix() -> Result<MatrixData, String> {
    let pricing = ModelPricing::default();
    let rates = FaasRates::default();
    let corpus = Corpus::bundled();
    let started = Instant::now();
    let mut cells = Vec::new();
    for app in AppKind::all() {
        for input in inputs(app, &corpus) {
            for config in MemoryConfig::all() {
                let result = run_cell(app, &input, config, &pricing, &rates)
                    .map_err(|e| e.to_string())?;
                cells.push(Cell {
                    app,
                    input: input.key.clone(),
                    config: config.label(),
                    rows: result.rows,
                });
            }
        }
    }
    Ok(MatrixData {
        elapsed: started.elapsed(),
        cells,
    })
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// 1. Configuration-matrix pass/fail pattern.

fn criterion_1(matrix: &MatrixData) -> Result<(), String> {
    ensure(
        matrix.elapsed < Duration::from_secs(60),
        format!("matrix took {:?}, budget is 60 s", matrix.elapsed),
    )?;
    for cell in &matrix.cells {
        let statuses: Vec<&str> = cell.rows.iter().map(|r| r.status.as_str()).collect();
        match cell.config {
            "E" => ensure(
                statuses == ["success", "dnf", "dnf"],
                format!(
                    "config E on {}/{} expected Q1 success then DNFs, got {statuses:?}",
                    cell.app.label(),
                    cell.input
                ),
            )?,
            "C" | "M" | "M+C" => ensure(
                statuses.iter().all(|s| *s == "success"),
                format!(
                    "config {} on {}/{} has a DNF: {statuses:?}",
                    cell.config,
                    cell.app.label(),
                    cell.input
                ),
            )?,
            _ => {}
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 2. Tool-call ordering across configurations.

fn criterion_2(matrix: &MatrixData) -> Result<(), String> {
    let corpus = Corpus::bundled();
    for app in AppKind::all() {
        for input in inputs(app, &corpus) {
            let n = matrix.tool_calls(app, &input.key, "N");
            let c = matrix.tool_calls(app, &input.key, "C");
            let m = matrix.tool_calls(app, &input.key, "M");
            let mc = matrix.tool_calls(app, &input.key, "M+C");
            let label = format!("{}/{}", app.label(), input.key);
            ensure(mc <= m, format!("{label}: M+C {mc} > M {m}"))?;
            ensure(m < n, format!("{label}: M {m} not below N {n}"))?;
            ensure(mc < c, format!("{label}: M+C {mc} not below C {c}"))?;
            ensure(c <= n, format!("{label}: C {c} > N {n}"))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 3. Input-token reduction relative to config N.

fn criterion_3(matrix: &MatrixData) -> Result<(), String> {
    let corpus = Corpus::bundled();
    for app in AppKind::all() {
        for input in inputs(app, &corpus) {
            let n = matrix.input_tokens(app, &input.key, "N");
            for config in ["C", "M", "M+C"] {
                let t = matrix.input_tokens(app, &input.key, config);
                let label = format!("{}/{}", app.label(), input.key);
                ensure(
                    t < n,
                    format!("{label}: config {config} tokens {t} not below N {n}"),
                )?;
                if app == AppKind::Research {
                    ensure(
                        t * 2 < n,
                        format!(
                            "{label}: config {config} reduction below 50% ({t} vs {n})"
                        ),
                    )?;
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 4. Cache semantics property suite.

fn server_for(tool: &str) -> FixtureServer {
    match tool {
        "download_pdf" => FixtureServer::Arxiv,
        "summarize_text" => FixtureServer::Rag,
        "filter_by_keyword" | "count_matches" => FixtureServer::LogAnalyzer,
        "plot" => FixtureServer::Visualization,
        _ => FixtureServer::Calculator,
    }
}

fn call_strategy() -> impl Strategy<Value = (String, Value)> {
    let corpus = Corpus::bundled();
    let titles: Vec<String> = corpus.papers().map(|p| p.title.clone()).collect();
    let logs: Vec<String> = corpus.logs().map(|l| l.title.clone()).collect();
    let stats = prop::sample::select(vec!["min", "max", "mean", "median", "std"]);
    let values = prop::collection::vec(-9i64..10, 1..6);
    let queries = prop::sample::select(vec!["kondo", "aerosol", "jupiter", "chondrule"]);
    let keywords = prop::sample::select(vec!["zzzz", "mouse", "session", "ERROR"]);
    let kinds = prop::sample::select(vec!["line", "bar", "scatter"]);
    prop_oneof![
        6 => (stats, values.clone())
            .prop_map(|(op, v)| (op.to_string(), json!({ "values": v }))),
        2 => prop::sample::select(titles)
            .prop_map(|t| ("download_pdf".to_string(), json!({ "title": t }))),
        2 => (prop::collection::vec("[a-z]{2,8}", 3..20), queries)
            .prop_map(|(words, q)| {
                ("summarize_text".to_string(), json!({ "text": words.join(" "), "query": q }))
            }),
        1 => (prop::sample::select(logs.clone()), keywords.clone())
            .prop_map(|(f, k)| ("count_matches".to_string(), json!({ "file": f, "keyword": k }))),
        1 => (prop::sample::select(logs), keywords)
            .prop_map(|(f, k)| {
                ("filter_by_keyword".to_string(), json!({ "file": f, "keyword": k }))
            }),
        2 => (values, kinds)
            .prop_map(|(v, k)| ("plot".to_string(), json!({ "series": { "s": v }, "kind": k }))),
    ]
}

fn fixture_call(tool: &str, args: &Value, shared: &FixtureShared) -> (Arc<fame_core::mcp::McpServer>, fame_core::ToolCallResult) {
    let server = Arc::new(build_server(server_for(tool), &Corpus::bundled(), shared));
    let result = server
        .host()
        .handle_invocation(&ToolCallRequest::new("r1", tool, args.clone()));
    (server, result)
}

fn criterion_4() -> Result<(), String> {
    let started = Instant::now();
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (
        call_strategy(),
        prop::collection::vec(prop::collection::vec(-3i64..4, 1..4), 1..8),
        1u64..120,
        0u64..1000,
        prop::collection::btree_map("[a-z]{1,6}", -100i64..100, 2..5),
    );
    runner
        .run(&strategy, |(call, lists, ttl, t0, pairs)| {
            let (tool, args) = &call;

            // Cache-hit content equals both the original and a fresh
            // execution on an independent host.
            let shared = FixtureShared::in_memory();
            let (server, first) = fixture_call(tool, args, &shared);
            prop_assert!(!first.is_error, "fixture call errored: {}", first.text());
            let second = server
                .host()
                .handle_invocation(&ToolCallRequest::new("r2", tool, args.clone()));
            prop_assert!(second.cache_hit, "second identical call missed the cache");
            prop_assert_eq!(&second.content, &first.content);
            let (_fresh_server, fresh) = fixture_call(tool, args, &FixtureShared::in_memory());
            prop_assert_eq!(&fresh.content, &first.content);

            // Execution-count law: with ttl = infinity, one handler
            // execution per distinct key.
            let calc = build_server(
                FixtureServer::Calculator,
                &Corpus::bundled(),
                &FixtureShared::in_memory(),
            );
            let mut distinct: Vec<&Vec<i64>> = Vec::new();
            for list in &lists {
                if !distinct.contains(&list) {
                    distinct.push(list);
                }
                calc.host().handle_invocation(&ToolCallRequest::new(
                    "r",
                    "min",
                    json!({ "values": list }),
                ));
            }
            prop_assert_eq!(calc.host().execution_count(), distinct.len() as u64);

            // TTL strict-expiry boundary.
            let mut host = ToolHost::in_memory("ttl");
            host.register(
                HostedTool::new(
                    ToolDescriptor::new("echo", "echoes").param("v", "string", true, "value"),
                    Arc::new(|args: &Map<String, Value>, _ctx: &HostContext| {
                        Ok(vec![ContentItem::text(
                            args.get("v").and_then(Value::as_str).unwrap_or(""),
                        )])
                    }),
                )
                .with_ttl(Ttl::Seconds(ttl)),
            );
            let req = ToolCallRequest::new("r", "echo", json!({ "v": "x" }));
            host.handle_invocation_at(&req, t0);
            prop_assert!(host.handle_invocation_at(&req, t0 + ttl - 1).cache_hit);
            prop_assert!(!host.handle_invocation_at(&req, t0 + ttl).cache_hit);

            // Errors are never cached, even under an infinite TTL.
            let mut failing = ToolHost::in_memory("fail");
            failing.register(
                HostedTool::new(
                    ToolDescriptor::new("boom", "always fails"),
                    Arc::new(|_args: &Map<String, Value>, _ctx: &HostContext| {
                        Err(HandlerError::Tool("boom".into()))
                    }),
                )
                .with_ttl(Ttl::Infinite),
            );
            let req = ToolCallRequest::new("r", "boom", json!({}));
            failing.handle_invocation(&req);
            failing.handle_invocation(&req);
            prop_assert_eq!(failing.execution_count(), 2);

            // Argument order never changes the cache key.
            let forward: Vec<String> =
                pairs.iter().map(|(k, v)| format!("{k:?}:{v}")).collect();
            let reversed: Vec<String> =
                pairs.iter().rev().map(|(k, v)| format!("{k:?}:{v}")).collect();
            let a: Map<String, Value> =
                serde_json::from_str(&format!("{{{}}}", forward.join(","))).unwrap();
            let b: Map<String, Value> =
                serde_json::from_str(&format!("{{{}}}", reversed.join(","))).unwrap();
            prop_assert_eq!(cache_key(tool, &a).unwrap(), cache_key(tool, &b).unwrap());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(
        elapsed < Duration::from_secs(5),
        format!("cache suite took {elapsed:?}, budget is 5 s"),
    )
}

// ---------------------------------------------------------------------------
// 5. Memory-store laws.

fn message_of(role_user: bool, content: &str) -> ChatMessage {
    if role_user {
        ChatMessage::user(content)
    } else {
        ChatMessage::assistant(content)
    }
}

fn check_store_laws(
    store: &dyn MemoryStore,
    session: &str,
    shape: &[Vec<(bool, String)>],
) -> Result<(), String> {
    let mut working: Vec<ChatMessage> = Vec::new();
    for (index, invocation) in shape.iter().enumerate() {
        let own: Vec<ChatMessage> =
            invocation.iter().map(|(u, c)| message_of(*u, c)).collect();
        working.extend(own.iter().cloned());
        let record = persist_invocation(
            store,
            session,
            &format!("{:04}", index + 1),
            &format!("q{index}"),
            &format!("a{index}"),
            "success",
            &working,
        )
        .map_err(|e| e.to_string())?;
        // Dedup law: only the suffix this invocation added is stored.
        ensure(record.messages == own, "stored record repeats prior messages")?;
    }
    let records = store.load_session(session).map_err(|e| e.to_string())?;
    ensure(records.len() == shape.len(), "record count mismatch")?;
    ensure(
        session_messages(&records) == working,
        "concatenated records do not reproduce the working list",
    )?;
    if let Some(first) = records.first() {
        match store.append(first) {
            Err(MemoryError::Conflict { .. }) => {}
            other => {
                return Err(format!(
                    "duplicate append should conflict, got {other:?}"
                ))
            }
        }
    }
    Ok(())
}

fn criterion_5() -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig {
        cases: 500,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let shape = prop::collection::vec(
        prop::collection::vec((any::<bool>(), "[ -~]{0,24}"), 0..5),
        1..5,
    );
    let strategy = (shape, 0usize..5);
    runner
        .run(&strategy, |(shape, config_index)| {
            let memory = InMemoryStore::new();
            check_store_laws(&memory, "s", &shape).map_err(|e| TestCaseError::fail(e))?;

            let dir = tempfile::tempdir().unwrap();
            let files = FileStore::new(dir.path()).unwrap();
            check_store_laws(&files, "s", &shape).map_err(|e| TestCaseError::fail(e))?;
            // Round-trip: a fresh handle over the same root sees the same
            // records.
            let reopened = FileStore::new(dir.path()).unwrap();
            prop_assert_eq!(
                reopened.load_session("s").unwrap(),
                files.load_session("s").unwrap()
            );

            // Config gating: blob indirection and host caching follow the
            // memory configuration, nothing else.
            let config = MemoryConfig::all()[config_index];
            prop_assert_eq!(
                config.blob_indirection(),
                config.mcp_caching || config.agent_memory
            );
            let settings = config.host_settings();
            prop_assert_eq!(settings.caching_enabled, config.mcp_caching);
            prop_assert_eq!(settings.inline_threshold.is_some(), config.blob_indirection());
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // A persisted 3-invocation session reproduces its transcripts exactly.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store: Arc<dyn MemoryStore> =
        Arc::new(FileStore::new(dir.path()).map_err(|e| e.to_string())?);
    let corpus = Corpus::bundled();
    let input = inputs(AppKind::Research, &corpus).remove(0);
    let engine = build_engine(
        AppKind::Research,
        MemoryConfig::M,
        &corpus,
        Some(store.clone()),
        None,
    )
    .map_err(|e| e.to_string())?;
    let queries = session_queries(AppKind::Research, &input);
    let outcome = engine
        .orchestrator
        .run_session("acc-c5", &queries)
        .map_err(|e| e.to_string())?;
    ensure(outcome.invocations.len() == 3, "expected 3 invocations")?;
    let last = outcome.invocations.last().unwrap();
    let mut expected = last.envelope.injected_memory.clone();
    expected.extend(last.envelope.transcript.iter().cloned());
    let records = store.load_session("acc-c5").map_err(|e| e.to_string())?;
    ensure(records.len() == 3, "expected 3 persisted records")?;
    ensure(
        session_messages(&records) == expected,
        "reloaded session does not reproduce the transcripts",
    )
}

// ---------------------------------------------------------------------------
// 6. State-machine bounds.

struct AlwaysRetryEvaluator {
    inner: RuleBasedMock,
    planner_completions: AtomicU64,
}

impl ChatBackend for AlwaysRetryEvaluator {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError> {
        let system = messages.first().map(|m| m.content.as_str()).unwrap_or("");
        if system.contains("You are the Evaluator") {
            return Ok(CompletionResult {
                message: ChatMessage::assistant(
                    "{\"success\": false, \"needs_retry\": true, \"reason\": \"forced\", \
                     \"feedback\": \"try again\"}",
                ),
                input_tokens: 1,
                output_tokens: 1,
            });
        }
        if system.contains("You are the Planner") {
            self.planner_completions.fetch_add(1, Ordering::SeqCst);
        }
        self.inner.complete(messages)
    }
}

struct LoopingActor {
    actor_completions: AtomicU64,
}

impl ChatBackend for LoopingActor {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError> {
        let system = messages.first().map(|m| m.content.as_str()).unwrap_or("");
        let message = if system.contains("You are the Actor") {
            let n = self.actor_completions.fetch_add(1, Ordering::SeqCst);
            ChatMessage::assistant_tool_call(ToolCallSpec {
                id: format!("loop-{n}"),
                tool_name: "min".to_string(),
                arguments: json!({ "values": [1, 2] }),
            })
        } else if system.contains("You are the Planner") {
            ChatMessage::assistant(
                "{\"tools_to_use\": [{\"tool\": \"min\", \"args\": {\"values\": [1, 2]}}], \
                 \"reasoning\": \"loop\"}",
            )
        } else {
            ChatMessage::assistant("{\"success\": true, \"needs_retry\": false}")
        };
        Ok(CompletionResult {
            message,
            input_tokens: 1,
            output_tokens: 1,
        })
    }
}

struct FixedReply(&'static str);

impl ChatBackend for FixedReply {
    fn complete(&self, _messages: &[ChatMessage]) -> Result<CompletionResult, GatewayError> {
        Ok(CompletionResult {
            message: ChatMessage::assistant(self.0),
            input_tokens: 1,
            output_tokens: 1,
        })
    }
}

fn criterion_6() -> Result<(), String> {
    let corpus = Corpus::bundled();
    let input = inputs(AppKind::Research, &corpus).remove(0);
    let query = session_queries(AppKind::Research, &input).remove(0);

    // Always-retry evaluator: exactly MAX_ITERATIONS planner completions,
    // then DNF.
    let backend = Arc::new(AlwaysRetryEvaluator {
        inner: RuleBasedMock::new(RuleSet::research()),
        planner_completions: AtomicU64::new(0),
    });
    let engine = build_engine(
        AppKind::Research,
        MemoryConfig::N,
        &corpus,
        None,
        Some(backend.clone()),
    )
    .map_err(|e| e.to_string())?;
    let outcome = engine
        .orchestrator
        .run_invocation("acc-c6a", "0001", &query, &Default::default())
        .map_err(|e| e.to_string())?;
    let planners = backend.planner_completions.load(Ordering::SeqCst);
    ensure(
        planners == MAX_ITERATIONS as u64,
        format!("expected {MAX_ITERATIONS} planner completions, got {planners}"),
    )?;
    ensure(
        outcome.status == InvocationStatus::DidNotFinish,
        "always-retry run should not finish",
    )?;
    ensure(
        outcome.envelope.iteration_count == MAX_ITERATIONS,
        "iteration count should equal the budget",
    )?;

    // Always-tool-calling actor: the loop stops at the superstep cap.
    let backend = Arc::new(LoopingActor {
        actor_completions: AtomicU64::new(0),
    });
    let engine = build_engine(
        AppKind::Research,
        MemoryConfig::N,
        &corpus,
        None,
        Some(backend.clone()),
    )
    .map_err(|e| e.to_string())?;
    let outcome = engine
        .orchestrator
        .run_invocation("acc-c6b", "0001", &query, &Default::default())
        .map_err(|e| e.to_string())?;
    let actors = backend.actor_completions.load(Ordering::SeqCst);
    ensure(
        actors == SUPERSTEP_CAP as u64,
        format!("expected {SUPERSTEP_CAP} actor supersteps, got {actors}"),
    )?;
    ensure(outcome.envelope.actor_truncated, "actor should be truncated")?;
    ensure(
        outcome.envelope.tool_calls == SUPERSTEP_CAP as u64,
        "one tool call per superstep expected",
    )?;
    ensure(
        outcome.status == InvocationStatus::DidNotFinish,
        "truncated run should not finish",
    )?;

    // Clamp law: once the iteration budget is spent, no adversarial
    // evaluator output can request a retry.
    let engine = build_engine(AppKind::Research, MemoryConfig::N, &corpus, None, None)
        .map_err(|e| e.to_string())?;
    let adversarial = [
        "{\"success\": false, \"needs_retry\": true, \"reason\": \"r\", \"feedback\": \"f\"}",
        "{\"success\": true, \"needs_retry\": true}",
        "no json at all",
    ];
    for (reply, iteration) in adversarial
        .iter()
        .flat_map(|r| [(r, MAX_ITERATIONS), (r, MAX_ITERATIONS + 4)])
    {
        let probe = FixedReply(reply);
        let ctx = AgentContext {
            gateway: &probe,
            router: engine.orchestrator.router.as_ref(),
            clock: engine.clock.as_ref(),
            agent_memory: false,
            max_iterations: MAX_ITERATIONS,
            superstep_cap: SUPERSTEP_CAP,
        };
        let mut env = WorkflowEnvelope::new("acc-c6c", "0001", "q");
        env.iteration_count = iteration;
        run_evaluator(&ctx, &mut env).map_err(|e| e.to_string())?;
        let evaluation = env.evaluation.expect("evaluator ran");
        ensure(
            !evaluation.needs_retry,
            format!("retry not clamped for reply {reply:?} at iteration {iteration}"),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 7. Cost-model calibration.

fn criterion_7() -> Result<(), String> {
    let pricing = ModelPricing::default();
    let exact = llm_cost(50_000, 0, &pricing);
    ensure(
        exact == MicroCents(750_000) && exact.render_cents() == "0.7500",
        format!("llm_cost(50000, 0) rendered as {}", exact.render_cents()),
    )?;

    let samples = [0u64, 1, 7, 499, 50_000];
    for a in samples {
        for b in samples {
            for c in samples {
                for d in samples {
                    let combined = llm_cost(a + c, b + d, &pricing);
                    let split = llm_cost(a, b, &pricing) + llm_cost(c, d, &pricing);
                    ensure(
                        combined == split,
                        format!("linearity broken at ({a},{b})+({c},{d})"),
                    )?;
                }
            }
            let whole = llm_cost(a, b, &pricing);
            let parts = llm_cost(a, 0, &pricing) + llm_cost(0, b, &pricing);
            ensure(whole == parts, format!("decomposition broken at ({a},{b})"))?;
        }
    }

    let estimate = agent_compute_estimate(&FaasRates::default()).0;
    let target = 85_000i64;
    ensure(
        estimate >= target / 2 && estimate <= target + target / 2,
        format!("agent-compute estimate {estimate} micro-cents outside 50% of {target}"),
    )
}

// ---------------------------------------------------------------------------
// 8. Deployment simulation.

fn criterion_8() -> Result<(), String> {
    let workload = WorkloadSpec::default();
    let params = SimParams::default();
    let rates = FaasRates::default();
    for (app, tools) in [("research", research_tools()), ("logs", log_tools())] {
        let singleton_plan =
            build_plan(PackingMode::Singleton, &tools).map_err(|e| e.to_string())?;
        let consolidated_plan =
            build_plan(PackingMode::Consolidated, &tools).map_err(|e| e.to_string())?;
        let started = Instant::now();
        let singleton = simulate(&singleton_plan, &workload, &params, &rates);
        let consolidated = simulate(&consolidated_plan, &workload, &params, &rates);
        let elapsed = started.elapsed();
        ensure(
            elapsed < Duration::from_secs(2),
            format!("{app}: two simulations took {elapsed:?}, budget is 1 s each"),
        )?;
        ensure(
            consolidated.summary.cold_starts < singleton.summary.cold_starts,
            format!(
                "{app}: consolidated cold starts {} not below singleton {}",
                consolidated.summary.cold_starts, singleton.summary.cold_starts
            ),
        )?;
        if app == "research" {
            ensure(
                consolidated.summary.stable_per_call_cost_c
                    <= singleton.summary.stable_per_call_cost_c,
                format!(
                    "research: stable per-call cost {} above singleton {}",
                    consolidated.summary.stable_per_call_cost_c.render_cents(),
                    singleton.summary.stable_per_call_cost_c.render_cents()
                ),
            )?;
        }
        // Reruns with the same seed produce byte-identical timelines.
        for (plan, outcome) in [
            (&singleton_plan, &singleton),
            (&consolidated_plan, &consolidated),
        ] {
            let rerun = simulate(plan, &workload, &params, &rates);
            let mut a = Vec::new();
            let mut b = Vec::new();
            write_timeline(&outcome.timeline, &mut a).map_err(|e| e.to_string())?;
            write_timeline(&rerun.timeline, &mut b).map_err(|e| e.to_string())?;
            ensure(a == b, format!("{app}: timeline differs across reruns"))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 9. Calculator oracle equivalence.

fn oracle(op: &str, values: &[i64]) -> f64 {
    let floats: Vec<f64> = values.iter().map(|v| *v as f64).collect();
    let n = floats.len() as f64;
    match op {
        "min" => floats.iter().cloned().fold(f64::INFINITY, f64::min),
        "max" => floats.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "mean" => floats.iter().sum::<f64>() / n,
        "median" => {
            let mut sorted = floats.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            }
        }
        "std" => {
            let mean = floats.iter().sum::<f64>() / n;
            (floats.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
        }
        other => panic!("unknown op {other}"),
    }
}

fn criterion_9() -> Result<(), String> {
    let settings = HostSettings {
        caching_enabled: false,
        inline_threshold: None,
        ttl_override: None,
    };
    let server = build_server(
        FixtureServer::Calculator,
        &Corpus::bundled(),
        &FixtureShared::with_settings(settings),
    );
    let ops = ["min", "max", "mean", "median", "std"];
    let mut checked = 0u64;
    for len in 1..=6usize {
        let mut odometer = vec![0i64; len];
        loop {
            let values: Vec<i64> = odometer.iter().map(|d| d - 3).collect();
            let args = json!({ "values": values });
            for op in ops {
                let result = server
                    .host()
                    .handle_invocation(&ToolCallRequest::new("r", op, args.clone()));
                if result.is_error {
                    return Err(format!("{op}({values:?}) errored: {}", result.text()));
                }
                let got: f64 = result
                    .text()
                    .parse()
                    .map_err(|_| format!("{op}({values:?}) returned {:?}", result.text()))?;
                let want = oracle(op, &values);
                if (got - want).abs() > 1e-9 {
                    return Err(format!("{op}({values:?}) = {got}, oracle says {want}"));
                }
                checked += 1;
            }
            // Advance the base-7 odometer; carry out means this length is
            // exhausted.
            let mut position = 0;
            loop {
                if position == len {
                    break;
                }
                odometer[position] += 1;
                if odometer[position] < 7 {
                    break;
                }
                odometer[position] = 0;
                position += 1;
            }
            if position == len {
                break;
            }
        }
    }
    // Lists of length 1..=6 over seven values: sum of 7^k = 137,256.
    ensure(checked == 137_256 * 5, format!("checked {checked} calls"))
}

// ---------------------------------------------------------------------------
// 10. Protocol conformance.

fn value_strategy() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        (-100_000i64..100_000).prop_map(Value::from),
        "[ -~]{0,16}".prop_map(Value::from),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
            prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn envelope_strategy() -> impl Strategy<Value = RpcEnvelope> {
    let id = prop_oneof![
        any::<i64>().prop_map(RpcId::Num),
        "[a-zA-Z0-9_-]{1,12}".prop_map(RpcId::Str),
    ];
    let method = prop::sample::select(vec![
        RpcMethod::Initialize,
        RpcMethod::ToolsList,
        RpcMethod::ToolsCall,
    ]);
    prop_oneof![
        (id.clone(), method, value_strategy())
            .prop_map(|(id, method, params)| RpcEnvelope::request(id, method, params)),
        (id.clone(), value_strategy()).prop_map(|(id, result)| RpcEnvelope::response(id, result)),
        (id, -32_700i64..0, "[ -~]{0,32}")
            .prop_map(|(id, code, message)| RpcEnvelope::error(id, code, message)),
    ]
}

fn calculator_session(
) -> Result<(fame_core::mcp::McpSession, Option<fame_core::mcp::ServeHandle>), String> {
    let shared = FixtureShared {
        clock: Arc::new(ManualClock::new()),
        ..FixtureShared::in_memory()
    };
    let server = Arc::new(build_server(
        FixtureServer::Calculator,
        &Corpus::bundled(),
        &shared,
    ));
    let session = initialize_session(Arc::new(InProcessTransport::new(server)))
        .map_err(|e| e.to_string())?;
    Ok((session, None))
}

fn criterion_10() -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&envelope_strategy(), |envelope| {
            let decoded = decode_envelope(&encode_envelope(&envelope))
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(decoded.id(), envelope.id());
            prop_assert_eq!(decoded, envelope);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // Transport equivalence: the same call sequence against two identical
    // calculator servers, one in-process and one over HTTP.
    let (in_process, _none) = calculator_session()?;
    let shared = FixtureShared {
        clock: Arc::new(ManualClock::new()),
        ..FixtureShared::in_memory()
    };
    let server = Arc::new(build_server(
        FixtureServer::Calculator,
        &Corpus::bundled(),
        &shared,
    ));
    let handle = serve_http(server, 0).map_err(|e| e.to_string())?;
    let http = initialize_session(Arc::new(HttpTransport::new(&handle.url())))
        .map_err(|e| e.to_string())?;

    ensure(
        in_process.list_tools().map_err(|e| e.to_string())?
            == http.list_tools().map_err(|e| e.to_string())?,
        "tool listings differ across transports",
    )?;

    let calls = [
        ("c1", "min", json!({ "values": [3, 1, 2] })),
        ("c2", "mean", json!({ "values": [1, 2, 3, 4] })),
        ("c3", "std", json!({ "values": [2, 2] })),
        ("c4", "median", json!({ "values": [5, -1, 3] })),
        ("c5", "max", json!({ "values": [0] })),
        // Repeat of c1: must hit the cache on both transports.
        ("c6", "min", json!({ "values": [3, 1, 2] })),
    ];
    for (id, tool, args) in calls {
        let req = ToolCallRequest::new(id, tool, args);
        let a = in_process.call_tool(&req).map_err(|e| e.to_string())?;
        let b = http.call_tool(&req).map_err(|e| e.to_string())?;
        ensure(
            a.request_id == id && b.request_id == id,
            format!("response id mismatch for {id}"),
        )?;
        ensure(
            a == b,
            format!("transports disagree on {tool}: {a:?} vs {b:?}"),
        )?;
        if id == "c6" {
            ensure(a.cache_hit && b.cache_hit, "repeat call should hit the cache")?;
        }
    }
    handle.stop();
    Ok(())
}

// ---------------------------------------------------------------------------

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(result) => result,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            Err(format!("panicked: {msg}"))
        }
    }
}

#[test]
fn acceptance() {
    let matrix = guarded(run_full_matrix);
    let matrix_check = |f: &dyn Fn(&MatrixData) -> Result<(), String>| match &matrix {
        Ok(data) => guarded(|| f(data)),
        Err(e) => Err(format!("matrix run failed: {e}")),
    };

    let results: Vec<(&str, Result<(), String>)> = vec![
        ("config-matrix pass/fail pattern", matrix_check(&criterion_1)),
        ("tool-call reduction ordering", matrix_check(&criterion_2)),
        ("input-token reduction", matrix_check(&criterion_3)),
        ("cache semantics property suite", guarded(criterion_4)),
        ("memory store laws", guarded(criterion_5)),
        ("state-machine bounds", guarded(criterion_6)),
        ("cost model calibration", guarded(criterion_7)),
        ("deployment simulation", guarded(criterion_8)),
        ("calculator oracle equivalence", guarded(criterion_9)),
        ("protocol conformance", guarded(criterion_10)),
    ];

    let mut failures = Vec::new();
    for (index, (name, result)) in results.iter().enumerate() {
        match result {
            Ok(()) => println!("criterion {:2}: PASS - {name}", index + 1),
            Err(e) => {
                println!("criterion {:2}: FAIL - {name}: {e}", index + 1);
                failures.push(format!("criterion {} ({name}): {e}", index + 1));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
