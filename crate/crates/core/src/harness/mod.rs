//! Full-engine wiring for the two reference applications and the
//! configuration matrix: build the five servers, route them behind MCP
//! sessions, drive sessions with the rule-based model and collect report
//! rows.

use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::fixtures::{build_all, Corpus, CorpusDocument, DocKind, FixtureShared};
use crate::gateway::{ChatBackend, ModelPricing, RuleBasedMock, RuleSet};
use crate::host::{
    BlobStore, InvocationCache, ManualClock, MemoryBlobStore, MemoryCache, TelemetrySink,
};
use crate::mcp::{initialize_session, InProcessTransport, SessionError, ToolRouter};
use crate::memory::{ClientMemory, InMemoryStore, MemoryConfig, MemoryStore};
use crate::metrics::{report_row, FaasRates, ReportRow};
use crate::agents::{MAX_ITERATIONS, SUPERSTEP_CAP};
use crate::orchestrator::{InvocationOutcome, Orchestrator, OrchestratorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppKind {
    Research,
    Logs,
}

impl AppKind {
    pub fn all() -> [AppKind; 2] {
        [AppKind::Research, AppKind::Logs]
    }

    pub fn label(&self) -> &'static str {
        match self {
            AppKind::Research => "research",
            AppKind::Logs => "logs",
        }
    }

    pub fn parse(s: &str) -> Option<AppKind> {
        AppKind::all().into_iter().find(|a| a.label() == s)
    }

    pub fn rule_set(&self) -> RuleSet {
        match self {
            AppKind::Research => RuleSet::research(),
            AppKind::Logs => RuleSet::logs(),
        }
    }
}

/// One workload input: a paper or a log file from the corpus.
#[derive(Debug, Clone)]
pub struct AppInput {
    /// Short key used in report rows (p1..p3, apache, hadoop, openssh).
    pub key: String,
    pub title: String,
    pub keyword: Option<String>,
}

pub fn inputs(app: AppKind, corpus: &Corpus) -> Vec<AppInput> {
    let docs: Vec<&CorpusDocument> = match app {
        AppKind::Research => corpus.papers().collect(),
        AppKind::Logs => corpus.logs().collect(),
    };
    docs.into_iter()
        .enumerate()
        .map(|(index, doc)| {
            let key = match doc.kind {
                DocKind::Paper => format!("p{}", index + 1),
                DocKind::Log => doc
                    .title
                    .trim_end_matches(".log")
                    .to_string(),
            };
            AppInput {
                key,
                title: doc.title.clone(),
                keyword: doc.keyword.clone(),
            }
        })
        .collect()
}

/// The three-query session run against one input.
pub fn session_queries(app: AppKind, input: &AppInput) -> Vec<String> {
    match app {
        AppKind::Research => vec![
            format!(
                "Summarize the introduction and core contributions of the paper titled '{}'.",
                input.title
            ),
            "Describe its methodology and analysis.".to_string(),
            "Summarize its conclusions, implications and future work.".to_string(),
        ],
        AppKind::Logs => {
            let keyword = input.keyword.clone().unwrap_or_default();
            vec![
                format!(
                    "Count the occurrences of error states '{keyword}' in the log file '{}'.",
                    input.title
                ),
                "Compute the mean and standard deviation of the timestamps of those error \
                 states."
                    .to_string(),
                "Report the min, max, mean and median of the timestamps and plot them."
                    .to_string(),
            ]
        }
    }
}

/// One assembled engine: orchestrator plus the shared telemetry sink and
/// virtual clock behind it.
pub struct Engine {
    pub orchestrator: Orchestrator,
    pub telemetry: Arc<TelemetrySink>,
    pub clock: Arc<ManualClock>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

/// Optional overrides for engine assembly; the defaults reproduce a fully
/// in-memory mock engine.
pub struct EngineOptions {
    pub store: Option<Arc<dyn MemoryStore>>,
    pub backend: Option<Arc<dyn ChatBackend>>,
    pub cache: Option<Arc<dyn InvocationCache>>,
    pub blob_store: Option<Arc<dyn BlobStore>>,
    pub max_iterations: u32,
    pub superstep_cap: u32,
    pub ttl_override: Option<u64>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            store: None,
            backend: None,
            cache: None,
            blob_store: None,
            max_iterations: MAX_ITERATIONS,
            superstep_cap: SUPERSTEP_CAP,
            ttl_override: None,
        }
    }
}

/// Wire the five fixture servers, in-process MCP sessions, a memory store
/// and a chat backend into one engine for the given configuration.
pub fn build_engine(
    app: AppKind,
    config: MemoryConfig,
    corpus: &Arc<Corpus>,
    store: Option<Arc<dyn MemoryStore>>,
    backend: Option<Arc<dyn ChatBackend>>,
) -> Result<Engine, HarnessError> {
    build_engine_with(
        app,
        config,
        corpus,
        EngineOptions {
            store,
            backend,
            ..EngineOptions::default()
        },
    )
}

pub fn build_engine_with(
    app: AppKind,
    config: MemoryConfig,
    corpus: &Arc<Corpus>,
    options: EngineOptions,
) -> Result<Engine, HarnessError> {
    let clock = Arc::new(ManualClock::new());
    let mut settings = config.host_settings();
    settings.ttl_override = options.ttl_override;
    let shared = FixtureShared {
        cache: options
            .cache
            .unwrap_or_else(|| Arc::new(MemoryCache::new()) as Arc<_>),
        blob_store: options
            .blob_store
            .unwrap_or_else(|| Arc::new(MemoryBlobStore::new()) as Arc<_>),
        telemetry: Arc::new(TelemetrySink::new()),
        clock: clock.clone(),
        settings,
    };
    let telemetry = shared.telemetry.clone();
    let mut sessions = Vec::new();
    for server in build_all(corpus, &shared) {
        let transport = Arc::new(InProcessTransport::new(server)) as Arc<_>;
        sessions.push(Arc::new(initialize_session(transport)?));
    }
    let router = Arc::new(ToolRouter::new(sessions)?);
    let gateway = options
        .backend
        .unwrap_or_else(|| Arc::new(RuleBasedMock::new(app.rule_set())) as Arc<_>);
    let store = options
        .store
        .unwrap_or_else(|| Arc::new(InMemoryStore::new()) as Arc<_>);
    Ok(Engine {
        orchestrator: Orchestrator {
            gateway,
            router,
            store,
            clock: clock.clone(),
            config,
            max_iterations: options.max_iterations,
            superstep_cap: options.superstep_cap,
        },
        telemetry,
        clock,
    })
}

/// Everything one (app, input, config) session produced.
pub struct CellResult {
    pub rows: Vec<ReportRow>,
    pub outcomes: Vec<InvocationOutcome>,
}

/// Run the three-query session for one cell of the matrix on a fresh
/// engine, producing one report row per invocation.
pub fn run_cell(
    app: AppKind,
    input: &AppInput,
    config: MemoryConfig,
    pricing: &ModelPricing,
    rates: &FaasRates,
) -> Result<CellResult, HarnessError> {
    let corpus = Corpus::bundled();
    let engine = build_engine(app, config, &corpus, None, None)?;
    let session_id = format!("{}-{}-{}", app.label(), input.key, config.label());
    let queries = session_queries(app, input);
    let mut client_memory = ClientMemory::new();
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
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
        rows.push(report_row(
            app.label(),
            &input.key,
            &format!("Q{}", index + 1),
            config,
            &outcome,
            &telemetry,
            pricing,
            rates,
        ));
        outcomes.push(outcome);
    }
    Ok(CellResult { rows, outcomes })
}

#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub apps: Vec<AppKind>,
    /// Input keys to keep; `None` keeps every input of each app.
    pub inputs: Option<Vec<String>>,
    pub configs: Vec<MemoryConfig>,
    pub repeats: u32,
    pub jobs: usize,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec {
            apps: AppKind::all().to_vec(),
            inputs: None,
            configs: MemoryConfig::all().to_vec(),
            repeats: 1,
            jobs: 1,
        }
    }
}

/// Raw per-repeat rows plus the per-cell field-wise means.
pub struct MatrixRows {
    pub raw: Vec<ReportRow>,
    pub mean: Vec<ReportRow>,
}

/// Run the full matrix, keeping the mean-aggregated rows only.
pub fn run_matrix(
    spec: &MatrixSpec,
    pricing: &ModelPricing,
    rates: &FaasRates,
) -> Result<Vec<ReportRow>, HarnessError> {
    Ok(run_matrix_rows(spec, pricing, rates)?.mean)
}

/// Run the full matrix. Repeats of a cell are averaged field-wise; cells
/// are independent engines, so `jobs > 1` fans them out across threads.
pub fn run_matrix_rows(
    spec: &MatrixSpec,
    pricing: &ModelPricing,
    rates: &FaasRates,
) -> Result<MatrixRows, HarnessError> {
    let corpus = Corpus::bundled();
    let mut cells = Vec::new();
    for app in &spec.apps {
        for input in inputs(*app, &corpus) {
            if let Some(keys) = &spec.inputs {
                if !keys.iter().any(|k| k.eq_ignore_ascii_case(&input.key)) {
                    continue;
                }
            }
            for config in &spec.configs {
                cells.push((*app, input.clone(), *config));
            }
        }
    }

    let repeats = spec.repeats.max(1);
    let mut results: Vec<Option<Result<CellRepeats, HarnessError>>> =
        (0..cells.len()).map(|_| None).collect();
    let next = Mutex::new(0usize);
    let results_mutex = Mutex::new(&mut results);
    let jobs = spec.jobs.max(1).min(cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = {
                    let mut guard = next.lock().unwrap();
                    if *guard >= cells.len() {
                        return;
                    }
                    let i = *guard;
                    *guard += 1;
                    i
                };
                let (app, input, config) = &cells[index];
                let outcome = run_cell_repeats(*app, input, *config, repeats, pricing, rates);
                results_mutex.lock().unwrap()[index] = Some(outcome);
            });
        }
    });

    let mut raw = Vec::new();
    let mut mean = Vec::new();
    for result in results {
        let cell = result.expect("every cell ran")?;
        raw.extend(cell.raw);
        mean.extend(cell.mean);
    }
    Ok(MatrixRows { raw, mean })
}

struct CellRepeats {
    raw: Vec<ReportRow>,
    mean: Vec<ReportRow>,
}

fn run_cell_repeats(
    app: AppKind,
    input: &AppInput,
    config: MemoryConfig,
    repeats: u32,
    pricing: &ModelPricing,
    rates: &FaasRates,
) -> Result<CellRepeats, HarnessError> {
    let mut runs = Vec::with_capacity(repeats as usize);
    for _ in 0..repeats {
        runs.push(run_cell(app, input, config, pricing, rates)?.rows);
    }
    let queries = runs[0].len();
    let mut mean = Vec::with_capacity(queries);
    for q in 0..queries {
        let per_query: Vec<ReportRow> = runs.iter().map(|r| r[q].clone()).collect();
        mean.push(crate::metrics::mean_rows(&per_query).expect("non-empty repeats"));
    }
    Ok(CellRepeats {
        raw: runs.into_iter().flatten().collect(),
        mean,
    })
}
