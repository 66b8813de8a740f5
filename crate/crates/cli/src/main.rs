//! Operator CLI: run fixture sessions, sweep the configuration matrix,
//! drive deployment simulations, serve fixture tools over HTTP and inspect
//! cache and memory roots.
//!
//! Exit codes: 0 success, 1 bad configuration or runtime failure, 2 at
//! least one query did not finish.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use fame_core::fixtures::{build_server, Corpus, FixtureServer, FixtureShared};
use fame_core::gateway::{ChatBackend, ModelPricing, RemoteBackend, ScriptedBackend};
use fame_core::harness::{
    build_engine_with, inputs, run_matrix_rows, session_queries, AppInput, AppKind,
    EngineOptions, MatrixSpec,
};
use fame_core::host::{BlobStore, DirBlobStore, DirCache, InvocationCache, Ttl};
use fame_core::mcp::serve_http;
use fame_core::memory::{ClientMemory, FileStore, MemoryConfig, MemoryStore};
use fame_core::metrics::{report_row, write_report, FaasRates, ReportRow};
use fame_core::orchestrator::InvocationStatus;
use fame_core::sim::{
    build_plan, log_tools, research_tools, simulate, write_timeline, PackingMode, SimParams,
    WorkloadSpec,
};

/// Environment variable holding the remote-backend API key. Credentials are
/// never accepted via flags or config files.
const API_KEY_ENV: &str = "FAME_API_KEY";

#[derive(Parser)]
#[command(name = "fame", version, about = "Serverless agentic workflow engine")]
struct Cli {
    /// TOML config file; explicit flags take precedence over its values.
    #[arg(long, global = true, value_name = "PATH")]
    config_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one 3-query session and emit report rows.
    Run(RunArgs),
    /// Run the app x input x config matrix and emit raw plus averaged rows.
    Matrix(MatrixArgs),
    /// Simulate singleton vs consolidated tool deployments.
    Simulate(SimulateArgs),
    /// Serve one fixture tool server over HTTP until interrupted.
    ServeTool(ServeArgs),
    /// Inspect or clear a directory-backed invocation cache.
    Cache(CacheArgs),
    /// Inspect a directory-backed session memory store.
    Memory(MemoryArgs),
}

#[derive(Args)]
struct RunArgs {
    /// research-summary or log-analytics.
    #[arg(long)]
    app: Option<String>,
    /// Corpus input key (p1..p3, apache, hadoop, openssh).
    #[arg(long)]
    input: Option<String>,
    /// Memory configuration label: E, N, C, M or M+C.
    #[arg(long)]
    config: Option<String>,
    /// mock, scripted:<trace path> or remote.
    #[arg(long)]
    backend: Option<String>,
    /// Report CSV path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    blob_root: Option<PathBuf>,
    #[arg(long)]
    memory_root: Option<PathBuf>,
    #[arg(long)]
    cache_root: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<u32>,
    #[arg(long)]
    superstep_cap: Option<u32>,
    /// Override every tool's cache TTL, in seconds (0 disables caching).
    #[arg(long)]
    ttl_override: Option<u64>,
    /// Chat-completions endpoint for the remote backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name for the remote backend.
    #[arg(long)]
    model: Option<String>,
    /// Session id; derived from app/input/config when omitted.
    #[arg(long)]
    session: Option<String>,
}

#[derive(Args)]
struct MatrixArgs {
    /// Comma-separated app list; default both.
    #[arg(long)]
    apps: Option<String>,
    /// Comma-separated input keys; default all inputs of each app.
    #[arg(long)]
    inputs: Option<String>,
    /// Comma-separated config labels; default E,N,C,M,M+C.
    #[arg(long)]
    configs: Option<String>,
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Raw per-repeat rows CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mean-aggregated rows CSV.
    #[arg(long)]
    aggregate: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// research-summary, log-analytics or both (default).
    #[arg(long, default_value = "both")]
    app: String,
    /// singleton, consolidated or both (default).
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    clients: u32,
    #[arg(long, default_value_t = 1000)]
    interarrival_ms: u64,
    #[arg(long, default_value_t = 120_000)]
    duration_ms: u64,
    #[arg(long, default_value_t = 800)]
    cold_start_base_ms: u64,
    #[arg(long, default_value_t = 300_000)]
    idle_timeout_ms: u64,
    #[arg(long, default_value_t = 0.6)]
    colocated_exec_factor: f64,
    #[arg(long, default_value_t = 40_000)]
    stable_after_ms: u64,
    /// Directory receiving one timeline CSV per (app, mode).
    #[arg(long)]
    timeline_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// arxiv, rag, log-analyzer, calculator or visualization.
    #[arg(long)]
    server: String,
    #[arg(long, default_value_t = 8731)]
    port: u16,
    #[arg(long)]
    blob_root: Option<PathBuf>,
    #[arg(long)]
    cache_root: Option<PathBuf>,
}

#[derive(Args)]
struct CacheArgs {
    #[command(subcommand)]
    action: CacheAction,
}

#[derive(Subcommand)]
enum CacheAction {
    /// List cache entries under the cache root.
    Ls {
        #[arg(long)]
        cache_root: Option<PathBuf>,
    },
    /// Remove every entry under the cache root.
    Clear {
        #[arg(long)]
        cache_root: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MemoryArgs {
    #[command(subcommand)]
    action: MemoryAction,
}

#[derive(Subcommand)]
enum MemoryAction {
    /// Print the persisted records of one session.
    Show {
        #[arg(long)]
        session: String,
        #[arg(long)]
        memory_root: Option<PathBuf>,
    },
}

/// Config-file counterpart of the run flags; keys mirror the flag names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    app: Option<String>,
    input: Option<String>,
    config: Option<String>,
    backend: Option<String>,
    report: Option<PathBuf>,
    blob_root: Option<PathBuf>,
    memory_root: Option<PathBuf>,
    cache_root: Option<PathBuf>,
    max_iterations: Option<u32>,
    superstep_cap: Option<u32>,
    ttl_override: Option<u64>,
    endpoint: Option<String>,
    model: Option<String>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("parsing config file {}", path.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        // A reader closing the pipe early (e.g. `fame cache ls | head`) is
        // not a failure.
        Err(e) if is_broken_pipe(&e) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        cause
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn dispatch(cli: Cli) -> Result<u8> {
    let file = load_file_config(cli.config_file.as_deref())?;
    match cli.command {
        Command::Run(args) => cmd_run(args, &file),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::ServeTool(args) => cmd_serve_tool(args, &file),
        Command::Cache(args) => cmd_cache(args, &file),
        Command::Memory(args) => cmd_memory(args, &file),
    }
}

fn parse_app(label: &str) -> Result<AppKind> {
    match label {
        "research-summary" | "research" | "rs" => Ok(AppKind::Research),
        "log-analytics" | "logs" | "la" => Ok(AppKind::Logs),
        other => bail!("unknown app {other:?}; expected research-summary or log-analytics"),
    }
}

fn find_input(app: AppKind, key: &str, corpus: &Arc<Corpus>) -> Result<AppInput> {
    let available = inputs(app, corpus);
    available
        .iter()
        .find(|i| i.key.eq_ignore_ascii_case(key))
        .cloned()
        .ok_or_else(|| {
            let keys: Vec<&str> = available.iter().map(|i| i.key.as_str()).collect();
            anyhow!(
                "unknown input {key:?} for {}; available: {}",
                app.label(),
                keys.join(", ")
            )
        })
}

fn parse_config(label: &str) -> Result<MemoryConfig> {
    let canonical = match label.to_ascii_uppercase().as_str() {
        "M+C" | "MC" => "M+C".to_string(),
        other => other.to_string(),
    };
    MemoryConfig::parse(&canonical)
        .ok_or_else(|| anyhow!("unknown config label {label:?}; expected E, N, C, M or M+C"))
}

fn build_backend(
    spec: &str,
    endpoint: Option<&str>,
    model: Option<&str>,
) -> Result<Option<Arc<dyn ChatBackend>>> {
    if spec == "mock" {
        return Ok(None);
    }
    if let Some(path) = spec.strip_prefix("scripted:") {
        let backend = ScriptedBackend::load(Path::new(path))
            .map_err(|e| anyhow!("loading trace {path}: {e}"))?;
        return Ok(Some(Arc::new(backend)));
    }
    if spec == "remote" {
        let endpoint = endpoint.unwrap_or("https://api.openai.com/v1");
        let model = model.unwrap_or("gpt-4o-mini");
        let backend = RemoteBackend::new(endpoint, model, API_KEY_ENV)
            .map_err(|e| anyhow!("remote backend: {e}"))?;
        return Ok(Some(Arc::new(backend)));
    }
    bail!("unknown backend {spec:?}; expected mock, scripted:<path> or remote")
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn write_rows(rows: &[ReportRow], path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            write_report(rows, file)?;
        }
        None => {
            let stdout = std::io::stdout();
            write_report(rows, stdout.lock())?;
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs, file: &FileConfig) -> Result<u8> {
    let app = parse_app(
        &pick(args.app, file.app.clone()).ok_or_else(|| anyhow!("missing --app"))?,
    )?;
    let corpus = Corpus::bundled();
    let input = find_input(
        app,
        &pick(args.input, file.input.clone()).ok_or_else(|| anyhow!("missing --input"))?,
        &corpus,
    )?;
    let config = parse_config(
        &pick(args.config, file.config.clone()).ok_or_else(|| anyhow!("missing --config"))?,
    )?;
    let backend_spec =
        pick(args.backend, file.backend.clone()).unwrap_or_else(|| "mock".to_string());
    let endpoint = pick(args.endpoint, file.endpoint.clone());
    let model = pick(args.model, file.model.clone());
    let backend = build_backend(&backend_spec, endpoint.as_deref(), model.as_deref())?;

    let max_iterations = pick(args.max_iterations, file.max_iterations).unwrap_or(3);
    let superstep_cap = pick(args.superstep_cap, file.superstep_cap).unwrap_or(25);
    if max_iterations == 0 || superstep_cap == 0 {
        bail!("max-iterations and superstep-cap must be at least 1");
    }

    let store: Option<Arc<dyn MemoryStore>> =
        match pick(args.memory_root, file.memory_root.clone()) {
            Some(root) => Some(Arc::new(
                FileStore::new(&root)
                    .with_context(|| format!("opening memory root {}", root.display()))?,
            )),
            None => None,
        };
    let cache: Option<Arc<dyn InvocationCache>> = pick(args.cache_root, file.cache_root.clone())
        .map(|root| Arc::new(DirCache::new(root)) as Arc<dyn InvocationCache>);
    let blob_store: Option<Arc<dyn BlobStore>> = pick(args.blob_root, file.blob_root.clone())
        .map(|root| Arc::new(DirBlobStore::new(root)) as Arc<dyn BlobStore>);

    let engine = build_engine_with(
        app,
        config,
        &corpus,
        EngineOptions {
            store,
            backend,
            cache,
            blob_store,
            max_iterations,
            superstep_cap,
            ttl_override: pick(args.ttl_override, file.ttl_override),
        },
    )?;

    let session_id = args
        .session
        .unwrap_or_else(|| format!("{}-{}-{}", app.label(), input.key, config.label()));
    let pricing = ModelPricing::default();
    let rates = FaasRates::default();
    let queries = session_queries(app, &input);
    let mut client_memory = ClientMemory::new();
    let mut rows = Vec::new();
    let mut any_dnf = false;
    for (index, query) in queries.iter().enumerate() {
        let invocation_id = format!("{:04}", index + 1);
        let mark = engine.telemetry.len();
        let outcome = engine.orchestrator.run_invocation(
            &session_id,
            &invocation_id,
            query,
            &client_memory,
        )?;
        client_memory.push(query, &outcome.client_answer());
        let telemetry = engine.telemetry.since(mark);
        let row = report_row(
            app.label(),
            &input.key,
            &format!("Q{}", index + 1),
            config,
            &outcome,
            &telemetry,
            &pricing,
            &rates,
        );
        eprintln!(
            "{} {} tool_calls={} cache_hits={} input_tokens={} total_cost_c={}",
            row.query,
            row.status,
            row.tool_calls,
            row.cache_hits,
            row.input_tokens,
            row.total_cost_c.render_cents()
        );
        any_dnf |= outcome.status == InvocationStatus::DidNotFinish;
        rows.push(row);
    }
    write_rows(&rows, pick(args.report, file.report.clone()).as_deref())?;
    Ok(if any_dnf { 2 } else { 0 })
}

fn split_list(arg: Option<&str>) -> Option<Vec<String>> {
    arg.map(|s| {
        s.split(',')
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect()
    })
}

fn cmd_matrix(args: MatrixArgs) -> Result<u8> {
    let apps = match split_list(args.apps.as_deref()) {
        Some(labels) => labels
            .iter()
            .map(|l| parse_app(l))
            .collect::<Result<Vec<_>>>()?,
        None => AppKind::all().to_vec(),
    };
    let configs = match split_list(args.configs.as_deref()) {
        Some(labels) => labels
            .iter()
            .map(|l| parse_config(l))
            .collect::<Result<Vec<_>>>()?,
        None => MemoryConfig::all().to_vec(),
    };
    let corpus = Corpus::bundled();
    let input_keys = split_list(args.inputs.as_deref());
    if let Some(keys) = &input_keys {
        for key in keys {
            let known = AppKind::all()
                .into_iter()
                .flat_map(|a| inputs(a, &corpus))
                .any(|i| i.key.eq_ignore_ascii_case(key));
            if !known {
                bail!("unknown input {key:?}");
            }
        }
        if keys.is_empty() {
            bail!("empty input selection");
        }
    }
    if apps.is_empty() || configs.is_empty() {
        bail!("empty app or config selection");
    }
    if args.repeats == 0 {
        bail!("repeats must be at least 1");
    }

    let spec = MatrixSpec {
        apps,
        inputs: input_keys,
        configs,
        repeats: args.repeats,
        jobs: args.jobs.max(1),
    };
    let pricing = ModelPricing::default();
    let rates = FaasRates::default();
    let rows = run_matrix_rows(&spec, &pricing, &rates)?;
    write_rows(&rows.raw, args.out.as_deref())?;
    if let Some(path) = &args.aggregate {
        write_rows(&rows.mean, Some(path))?;
    }
    eprintln!(
        "matrix complete: {} raw rows, {} aggregated rows",
        rows.raw.len(),
        rows.mean.len()
    );
    Ok(0)
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8> {
    let apps: Vec<(&str, Vec<fame_core::sim::ToolSpec>)> = match args.app.as_str() {
        "both" => vec![("research", research_tools()), ("logs", log_tools())],
        other => match parse_app(other)? {
            AppKind::Research => vec![("research", research_tools())],
            AppKind::Logs => vec![("logs", log_tools())],
        },
    };
    let modes = match args.mode.as_str() {
        "both" => vec![PackingMode::Singleton, PackingMode::Consolidated],
        "singleton" => vec![PackingMode::Singleton],
        "consolidated" => vec![PackingMode::Consolidated],
        other => bail!("unknown mode {other:?}; expected singleton, consolidated or both"),
    };
    let workload = WorkloadSpec {
        clients: args.clients,
        interarrival_ms: args.interarrival_ms,
        duration_ms: args.duration_ms,
    };
    let params = SimParams {
        rng_seed: args.seed,
        cold_start_base_ms: args.cold_start_base_ms,
        idle_timeout_ms: args.idle_timeout_ms,
        colocated_exec_factor: args.colocated_exec_factor,
        stable_after_ms: args.stable_after_ms,
    };
    let rates = FaasRates::default();
    if let Some(dir) = &args.timeline_dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
    }
    for (app, tools) in &apps {
        for mode in &modes {
            let plan = build_plan(*mode, tools)?;
            let outcome = simulate(&plan, &workload, &params, &rates);
            let s = &outcome.summary;
            println!(
                "{app} {mode}: events={} cold_starts={} gb_seconds={:.3} total_cost_c={} \
                 stable_per_call_cost_c={} mean_latency_ms={:.1}",
                s.events,
                s.cold_starts,
                s.gb_seconds,
                s.total_cost_c.render_cents(),
                s.stable_per_call_cost_c.render_cents(),
                s.mean_latency_ms,
                mode = mode.label(),
            );
            if let Some(dir) = &args.timeline_dir {
                let path = dir.join(format!("{app}-{}.csv", mode.label()));
                let file = File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_timeline(&outcome.timeline, file)?;
            }
        }
    }
    Ok(0)
}

fn cmd_serve_tool(args: ServeArgs, file: &FileConfig) -> Result<u8> {
    let which = FixtureServer::parse(&args.server)
        .ok_or_else(|| anyhow!("unknown server {:?}", args.server))?;
    let mut shared = FixtureShared::in_memory();
    if let Some(root) = pick(args.blob_root, file.blob_root.clone()) {
        shared.blob_store = Arc::new(DirBlobStore::new(root));
    }
    if let Some(root) = pick(args.cache_root, file.cache_root.clone()) {
        shared.cache = Arc::new(DirCache::new(root));
    }
    let server = Arc::new(build_server(which, &Corpus::bundled(), &shared));
    let handle = serve_http(server, args.port)
        .with_context(|| format!("binding port {}", args.port))?;
    println!("serving {} at {}", which.name(), handle.url());
    loop {
        std::thread::park();
    }
}

fn require_root(root: Option<PathBuf>, fallback: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    pick(root, fallback).ok_or_else(|| anyhow!("missing --{flag} (or config-file key)"))
}

fn cmd_cache(args: CacheArgs, file: &FileConfig) -> Result<u8> {
    match args.action {
        CacheAction::Ls { cache_root } => {
            let root = require_root(cache_root, file.cache_root.clone(), "cache-root")?;
            let mut out = std::io::stdout().lock();
            for entry in DirCache::new(root).list() {
                let ttl = match entry.ttl {
                    Ttl::Disabled => "disabled".to_string(),
                    Ttl::Infinite => "inf".to_string(),
                    Ttl::Seconds(s) => format!("{s}s"),
                };
                writeln!(
                    out,
                    "{} created_at={} ttl={} items={}",
                    entry.key,
                    entry.created_at,
                    ttl,
                    entry.payload.len()
                )?;
            }
        }
        CacheAction::Clear { cache_root } => {
            let root = require_root(cache_root, file.cache_root.clone(), "cache-root")?;
            let cache = DirCache::new(root);
            let count = cache.list().len();
            cache.clear();
            println!("removed {count} entries");
        }
    }
    Ok(0)
}

fn cmd_memory(args: MemoryArgs, file: &FileConfig) -> Result<u8> {
    match args.action {
        MemoryAction::Show {
            session,
            memory_root,
        } => {
            let root = require_root(memory_root, file.memory_root.clone(), "memory-root")?;
            let store = FileStore::new(&root)
                .with_context(|| format!("opening memory root {}", root.display()))?;
            let mut out = std::io::stdout().lock();
            for record in store.load_session(&session)? {
                writeln!(
                    out,
                    "{} [{}] {} messages\n  Q: {}\n  A: {}",
                    record.invocation_id,
                    record.status,
                    record.messages.len(),
                    record.query,
                    record.final_response
                )?;
            }
        }
    }
    Ok(0)
}
