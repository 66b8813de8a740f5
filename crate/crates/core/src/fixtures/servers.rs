//! The offline tool servers backing the two reference applications: an
//! article fetcher, an extractive summarizer, a log analyzer, a calculator
//! and a plotter. Seventeen tools across five servers; the handlers are
//! deterministic so runs are reproducible.

use std::sync::Arc;

use chrono::NaiveDateTime;
use serde_json::{Map, Value};

use super::corpus::{Corpus, DocKind};
use crate::host::{
    json_number, HandlerError, HostContext, HostSettings, HostedTool, InvocationCache,
    MemoryBlobStore, MemoryCache, SystemClock, TelemetrySink, ToolHost, Ttl,
};
use crate::host::{BlobStore, Clock};
use crate::mcp::{ContentItem, McpServer, ServerInfo, ToolDescriptor};

/// Resources shared by every server in one engine instance: blob store and
/// cache namespace, telemetry sink, clock and host settings.
#[derive(Clone)]
pub struct FixtureShared {
    pub cache: Arc<dyn InvocationCache>,
    pub blob_store: Arc<dyn BlobStore>,
    pub telemetry: Arc<TelemetrySink>,
    pub clock: Arc<dyn Clock>,
    pub settings: HostSettings,
}

impl FixtureShared {
    pub fn in_memory() -> Self {
        FixtureShared {
            cache: Arc::new(MemoryCache::new()),
            blob_store: Arc::new(MemoryBlobStore::new()),
            telemetry: Arc::new(TelemetrySink::new()),
            clock: Arc::new(SystemClock),
            settings: HostSettings::default(),
        }
    }

    pub fn with_settings(settings: HostSettings) -> Self {
        FixtureShared {
            settings,
            ..FixtureShared::in_memory()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureServer {
    Arxiv,
    Rag,
    LogAnalyzer,
    Calculator,
    Visualization,
}

impl FixtureServer {
    pub fn all() -> [FixtureServer; 5] {
        [
            FixtureServer::Arxiv,
            FixtureServer::Rag,
            FixtureServer::LogAnalyzer,
            FixtureServer::Calculator,
            FixtureServer::Visualization,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            FixtureServer::Arxiv => "arxiv",
            FixtureServer::Rag => "rag",
            FixtureServer::LogAnalyzer => "log-analyzer",
            FixtureServer::Calculator => "calculator",
            FixtureServer::Visualization => "visualization",
        }
    }

    pub fn parse(name: &str) -> Option<FixtureServer> {
        FixtureServer::all().into_iter().find(|s| s.name() == name)
    }

    /// Function memory sizing used for telemetry and the deployment
    /// simulator defaults.
    pub fn memory_mb(&self) -> u32 {
        match self {
            FixtureServer::Arxiv => 128,
            FixtureServer::LogAnalyzer => 200,
            _ => 400,
        }
    }
}

/// Nominal execution time per tool, charged against virtual clocks and used
/// as the simulator's default service times.
pub fn default_exec_ms(tool: &str) -> u64 {
    match tool {
        "download_pdf" => 250,
        "search_papers" => 80,
        "get_paper_metadata" => 40,
        "summarize_text" => 300,
        "index_document" => 150,
        "query_index" => 120,
        "filter_by_keyword" => 220,
        "count_matches" => 120,
        "tail_log" => 50,
        "list_log_files" => 30,
        "mean" => 50,
        "std" => 60,
        "min" | "max" | "median" => 40,
        "plot" => 180,
        "render_histogram" => 150,
        _ => 100,
    }
}

pub fn build_all(corpus: &Arc<Corpus>, shared: &FixtureShared) -> Vec<Arc<McpServer>> {
    FixtureServer::all()
        .into_iter()
        .map(|which| Arc::new(build_server(which, corpus, shared)))
        .collect()
}

pub fn build_server(
    which: FixtureServer,
    corpus: &Arc<Corpus>,
    shared: &FixtureShared,
) -> McpServer {
    let mut host = ToolHost::new(
        which.name(),
        Arc::clone(&shared.cache),
        Arc::clone(&shared.blob_store),
        Arc::clone(&shared.telemetry),
        Arc::clone(&shared.clock),
        shared.settings.clone(),
    );
    match which {
        FixtureServer::Arxiv => register_arxiv(&mut host, corpus),
        FixtureServer::Rag => register_rag(&mut host),
        FixtureServer::LogAnalyzer => register_log_analyzer(&mut host, corpus),
        FixtureServer::Calculator => register_calculator(&mut host),
        FixtureServer::Visualization => register_visualization(&mut host),
    }
    McpServer::new(ServerInfo::new(which.name(), "0.1.0"), host)
}

fn hosted(
    which: FixtureServer,
    descriptor: ToolDescriptor,
    ttl: Ttl,
    handler: Arc<dyn crate::host::ToolHandler>,
) -> HostedTool {
    let exec_ms = default_exec_ms(&descriptor.name);
    HostedTool::new(descriptor, handler)
        .with_ttl(ttl)
        .with_memory_mb(which.memory_mb())
        .with_exec_ms(exec_ms)
}

fn not_implemented(name: &'static str) -> Arc<dyn crate::host::ToolHandler> {
    Arc::new(move |_args: &Map<String, Value>, _ctx: &HostContext| {
        Err(HandlerError::Tool(format!("{name} is not implemented")))
    })
}

fn register_arxiv(host: &mut ToolHost, corpus: &Arc<Corpus>) {
    let corpus = Arc::clone(corpus);
    host.register(hosted(
        FixtureServer::Arxiv,
        ToolDescriptor::new("download_pdf", "Download the full text of a paper by title").param(
            "title",
            "string",
            true,
            "exact title of the paper",
        ),
        Ttl::Seconds(3600),
        Arc::new(move |args: &Map<String, Value>, ctx: &HostContext| {
            let title = args
                .get("title")
                .and_then(Value::as_str)
                .unwrap_or_default();
            let doc = corpus
                .find_title(title)
                .filter(|d| d.kind == DocKind::Paper)
                .ok_or_else(|| HandlerError::Tool(format!("paper not found: {title}")))?;
            Ok(vec![ctx.inline_or_blob(doc.body.as_bytes(), "text/plain")?])
        }),
    ));
    host.register(hosted(
        FixtureServer::Arxiv,
        ToolDescriptor::new("search_papers", "Search the index for papers matching a query")
            .param("query", "string", true, "free-text search query"),
        Ttl::Seconds(3600),
        not_implemented("search_papers"),
    ));
    host.register(hosted(
        FixtureServer::Arxiv,
        ToolDescriptor::new("get_paper_metadata", "Fetch bibliographic metadata for a paper")
            .param("title", "string", true, "exact title of the paper"),
        Ttl::Seconds(3600),
        not_implemented("get_paper_metadata"),
    ));
}

fn register_rag(host: &mut ToolHost) {
    host.register(hosted(
        FixtureServer::Rag,
        ToolDescriptor::new(
            "summarize_text",
            "Extract the sentences most relevant to a query from a document",
        )
        .param("text", "string", true, "document text or blob reference")
        .param("query", "string", true, "what the summary should focus on"),
        Ttl::Seconds(3600),
        Arc::new(|args: &Map<String, Value>, ctx: &HostContext| {
            let query = args
                .get("query")
                .and_then(Value::as_str)
                .unwrap_or_default();
            if query.trim().is_empty() {
                return Err(HandlerError::Tool("query must be non-empty".into()));
            }
            let text = ctx.resolve_text(args.get("text").unwrap_or(&Value::Null))?;
            let summary = extractive_summary(&text, query, 5);
            Ok(vec![ContentItem::text(&summary)])
        }),
    ));
    host.register(hosted(
        FixtureServer::Rag,
        ToolDescriptor::new("index_document", "Add a document to the retrieval index")
            .param("text", "string", true, "document text or blob reference"),
        Ttl::Disabled,
        not_implemented("index_document"),
    ));
    host.register(hosted(
        FixtureServer::Rag,
        ToolDescriptor::new("query_index", "Retrieve indexed passages for a query")
            .param("query", "string", true, "retrieval query"),
        Ttl::Seconds(3600),
        not_implemented("query_index"),
    ));
}

fn register_log_analyzer(host: &mut ToolHost, corpus: &Arc<Corpus>) {
    let filter_corpus = Arc::clone(corpus);
    host.register(hosted(
        FixtureServer::LogAnalyzer,
        ToolDescriptor::new(
            "filter_by_keyword",
            "Collect the timestamps of log lines containing a keyword",
        )
        .param("file", "string", true, "log file name, path or blob reference")
        .param("keyword", "string", true, "case-sensitive substring to match")
        .param(
            "timestamp_format",
            "string",
            false,
            "strftime format overriding the file's declared format",
        ),
        Ttl::Seconds(3600),
        Arc::new(move |args: &Map<String, Value>, ctx: &HostContext| {
            let keyword = args
                .get("keyword")
                .and_then(Value::as_str)
                .unwrap_or_default();
            if keyword.is_empty() {
                return Err(HandlerError::Tool("keyword must be non-empty".into()));
            }
            let (body, declared_format) = load_log(&filter_corpus, args.get("file"), ctx)?;
            let format = args
                .get("timestamp_format")
                .and_then(Value::as_str)
                .map(str::to_string)
                .or(declared_format)
                .ok_or_else(|| {
                    HandlerError::Tool("no timestamp format known for this file".into())
                })?;
            let mut timestamps: Vec<i64> = Vec::new();
            let mut skipped: u64 = 0;
            for line in body.lines() {
                if !line.contains(keyword) {
                    continue;
                }
                match NaiveDateTime::parse_and_remainder(line, &format) {
                    Ok((dt, _)) => timestamps.push(dt.and_utc().timestamp()),
                    Err(_) => skipped += 1,
                }
            }
            let payload = serde_json::json!({ "timestamps": timestamps, "skipped": skipped });
            let bytes = serde_json::to_vec(&payload)
                .map_err(|e| HandlerError::Host(e.to_string()))?;
            Ok(vec![ctx.inline_or_blob(&bytes, "application/json")?])
        }),
    ));
    let count_corpus = Arc::clone(corpus);
    host.register(hosted(
        FixtureServer::LogAnalyzer,
        ToolDescriptor::new(
            "count_matches",
            "Count the log lines containing a keyword",
        )
        .param("file", "string", true, "log file name, path or blob reference")
        .param("keyword", "string", true, "case-sensitive substring to match"),
        Ttl::Seconds(3600),
        Arc::new(move |args: &Map<String, Value>, ctx: &HostContext| {
            let keyword = args
                .get("keyword")
                .and_then(Value::as_str)
                .unwrap_or_default();
            if keyword.is_empty() {
                return Err(HandlerError::Tool("keyword must be non-empty".into()));
            }
            let (body, _) = load_log(&count_corpus, args.get("file"), ctx)?;
            let count = body.lines().filter(|l| l.contains(keyword)).count();
            Ok(vec![ContentItem::text(&count.to_string())])
        }),
    ));
    host.register(hosted(
        FixtureServer::LogAnalyzer,
        ToolDescriptor::new("tail_log", "Return the last lines of a log file")
            .param("file", "string", true, "log file name or path")
            .param("lines", "number", false, "how many lines to return"),
        Ttl::Disabled,
        not_implemented("tail_log"),
    ));
    host.register(hosted(
        FixtureServer::LogAnalyzer,
        ToolDescriptor::new("list_log_files", "List the log files available for analysis"),
        Ttl::Seconds(3600),
        not_implemented("list_log_files"),
    ));
}

fn register_calculator(host: &mut ToolHost) {
    let stats: [(&'static str, &'static str, fn(&[f64]) -> f64); 5] = [
        ("min", "Smallest value in a list of numbers", |v| {
            v.iter().cloned().fold(f64::INFINITY, f64::min)
        }),
        ("max", "Largest value in a list of numbers", |v| {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        }),
        ("mean", "Arithmetic mean of a list of numbers", |v| {
            v.iter().sum::<f64>() / v.len() as f64
        }),
        ("median", "Median of a list of numbers", median),
        ("std", "Population standard deviation of a list of numbers", |v| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
        }),
    ];
    for (name, description, op) in stats {
        host.register(hosted(
            FixtureServer::Calculator,
            ToolDescriptor::new(name, description).param(
                "values",
                "any",
                true,
                "numbers, or a blob reference to a JSON list or timestamp set",
            ),
            Ttl::Infinite,
            Arc::new(move |args: &Map<String, Value>, ctx: &HostContext| {
                let values = resolve_values(args.get("values"), ctx)?;
                if values.is_empty() {
                    return Err(HandlerError::Tool(format!("{name} of an empty list")));
                }
                let result = op(&values);
                if !result.is_finite() {
                    return Err(HandlerError::Tool("result is not finite".into()));
                }
                Ok(vec![ContentItem::text(&format_number(result))])
            }),
        ));
    }
}

fn register_visualization(host: &mut ToolHost) {
    host.register(hosted(
        FixtureServer::Visualization,
        ToolDescriptor::new("plot", "Render named numeric series to an SVG chart")
            .param("series", "map", true, "map from series name to list of numbers")
            .param("kind", "string", false, "line, bar or scatter (default line)"),
        Ttl::Infinite,
        Arc::new(|args: &Map<String, Value>, ctx: &HostContext| {
            let kind = args
                .get("kind")
                .and_then(Value::as_str)
                .unwrap_or("line");
            if !matches!(kind, "line" | "bar" | "scatter") {
                return Err(HandlerError::Tool(format!("unknown plot kind: {kind}")));
            }
            let series = args
                .get("series")
                .and_then(Value::as_object)
                .ok_or_else(|| HandlerError::Tool("series must be a map".into()))?;
            if series.is_empty() {
                return Err(HandlerError::Tool("series must be non-empty".into()));
            }
            let mut ordered: Vec<(&String, Vec<f64>)> = Vec::new();
            for (name, values) in series {
                let values = resolve_values(Some(values), ctx)?;
                if values.is_empty() {
                    return Err(HandlerError::Tool(format!("series {name} is empty")));
                }
                ordered.push((name, values));
            }
            ordered.sort_by(|a, b| a.0.cmp(b.0));
            let svg = render_svg(kind, &ordered);
            // Chart output is always referenced, never inlined into the
            // transcript.
            let blob = ctx.put_blob(svg.as_bytes(), "image/svg+xml")?;
            Ok(vec![ContentItem::blob(blob)])
        }),
    ));
    host.register(hosted(
        FixtureServer::Visualization,
        ToolDescriptor::new("render_histogram", "Render a histogram of a list of numbers")
            .param("values", "list", true, "numbers to bin")
            .param("bins", "number", false, "bin count"),
        Ttl::Infinite,
        not_implemented("render_histogram"),
    ));
}

/// Resolve a log argument to its text: corpus file name, blob reference or
/// on-disk path, in that order. Returns the declared timestamp format when
/// the file came from the corpus.
fn load_log(
    corpus: &Corpus,
    file: Option<&Value>,
    ctx: &HostContext,
) -> Result<(String, Option<String>), HandlerError> {
    let file = file.unwrap_or(&Value::Null);
    if let Value::String(name) = file {
        if let Some(doc) = corpus.find_title(name) {
            if doc.kind != DocKind::Log {
                return Err(HandlerError::Tool(format!("not a log file: {name}")));
            }
            return Ok((doc.body.clone(), doc.timestamp_format.clone()));
        }
        if !name.starts_with("blob://") {
            if let Ok(body) = std::fs::read_to_string(name) {
                return Ok((body, None));
            }
            return Err(HandlerError::Tool(format!("log file not found: {name}")));
        }
    }
    Ok((ctx.resolve_text(file)?, None))
}

/// Pull a list of numbers out of an argument that may be a literal JSON
/// list, a blob reference, or JSON text shaped `[...]` or
/// `{"timestamps": [...]}`.
fn resolve_values(value: Option<&Value>, ctx: &HostContext) -> Result<Vec<f64>, HandlerError> {
    let value = value.unwrap_or(&Value::Null);
    let parsed_storage;
    let list = match value {
        Value::Array(items) => items,
        other => {
            let text = ctx.resolve_text(other)?;
            parsed_storage = serde_json::from_str::<Value>(&text)
                .map_err(|_| HandlerError::Tool("values payload is not JSON".into()))?;
            match &parsed_storage {
                Value::Array(_) => parsed_storage.as_array().unwrap(),
                Value::Object(map) => map
                    .get("timestamps")
                    .and_then(Value::as_array)
                    .ok_or_else(|| {
                        HandlerError::Tool("values payload has no timestamps list".into())
                    })?,
                _ => {
                    return Err(HandlerError::Tool(
                        "values payload is not a list".into(),
                    ))
                }
            }
        }
    };
    let mut out = Vec::with_capacity(list.len());
    for item in list {
        let n = item
            .as_f64()
            .filter(|n| n.is_finite())
            .ok_or_else(|| HandlerError::Tool(format!("not a finite number: {item}")))?;
        out.push(n);
    }
    Ok(out)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Shortest decimal form: integers print without a fraction, everything
/// else round-trips through the JSON number renderer.
pub fn format_number(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 9.0e15 {
        format!("{}", value as i64)
    } else {
        json_number(value)
            .map(|n| n.to_string())
            .unwrap_or_else(|_| value.to_string())
    }
}

/// Pick the `k` sentences with the highest query-keyword counts, keeping
/// document order; sentences with zero matches are never included.
pub fn extractive_summary(text: &str, query: &str, k: usize) -> String {
    let keywords = query_keywords(query);
    let sentences = split_sentences(text);
    let mut scored: Vec<(usize, usize)> = sentences
        .iter()
        .enumerate()
        .filter_map(|(idx, sentence)| {
            let lowered = sentence.to_lowercase();
            let score: usize = keywords
                .iter()
                .map(|kw| count_occurrences(&lowered, kw))
                .sum();
            (score > 0).then_some((idx, score))
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored.sort_by_key(|(idx, _)| *idx);
    scored
        .into_iter()
        .map(|(idx, _)| sentences[idx])
        .collect::<Vec<_>>()
        .join(" ")
}

fn query_keywords(query: &str) -> Vec<String> {
    const STOPWORDS: [&str; 18] = [
        "the", "and", "its", "this", "that", "with", "for", "from", "summarize", "describe",
        "section", "sections", "what", "are", "how", "into", "about", "paper",
    ];
    let mut keywords: Vec<String> = query
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() >= 3 && !STOPWORDS.contains(w))
        .map(str::to_string)
        .collect();
    keywords.dedup();
    keywords
}

fn count_occurrences(haystack: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    let mut count = 0;
    let mut rest = haystack;
    while let Some(pos) = rest.find(needle) {
        count += 1;
        rest = &rest[pos + needle.len()..];
    }
    count
}

fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if matches!(bytes[i], b'.' | b'!' | b'?')
            && bytes
                .get(i + 1)
                .is_none_or(|b| b.is_ascii_whitespace())
        {
            let sentence = text[start..=i].trim();
            if sentence.len() > 1 {
                sentences.push(sentence);
            }
            start = i + 1;
        }
        i += 1;
    }
    let tail = text[start..].trim();
    if tail.len() > 1 {
        sentences.push(tail);
    }
    sentences
}

fn render_svg(kind: &str, series: &[(&String, Vec<f64>)]) -> String {
    const WIDTH: f64 = 640.0;
    const HEIGHT: f64 = 360.0;
    const PALETTE: [&str; 5] = ["#3366cc", "#dc3912", "#ff9900", "#109618", "#990099"];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, values) in series {
        for v in values {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if hi - lo < f64::EPSILON {
        hi = lo + 1.0;
    }
    let scale_y = |v: f64| HEIGHT - 20.0 - (v - lo) / (hi - lo) * (HEIGHT - 40.0);
    let mut body = String::new();
    for (index, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        let step = (WIDTH - 40.0) / values.len() as f64;
        let x_at = |i: usize| 20.0 + step * (i as f64 + 0.5);
        match kind {
            "bar" => {
                let bar_w = (step * 0.8).max(1.0);
                for (i, v) in values.iter().enumerate() {
                    let y = scale_y(*v);
                    body.push_str(&format!(
                        "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{color}\"/>",
                        x_at(i) - bar_w / 2.0,
                        y,
                        bar_w,
                        HEIGHT - 20.0 - y,
                    ));
                }
            }
            "scatter" => {
                for (i, v) in values.iter().enumerate() {
                    body.push_str(&format!(
                        "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{color}\"/>",
                        x_at(i),
                        scale_y(*v),
                    ));
                }
            }
            _ => {
                let points: Vec<String> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| format!("{:.3},{:.3}", x_at(i), scale_y(*v)))
                    .collect();
                body.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
                    points.join(" "),
                ));
            }
        }
        body.push_str(&format!(
            "<text x=\"24\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            16 + index * 14,
        ));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" data-kind=\"{kind}\">{body}</svg>"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcp::ToolCallRequest;
    use serde_json::json;

    fn call(server: &McpServer, tool: &str, args: Value) -> crate::mcp::ToolCallResult {
        server
            .host()
            .handle_invocation(&ToolCallRequest::new("t", tool, args))
    }

    fn build(which: FixtureServer) -> McpServer {
        build_server(which, &Corpus::bundled(), &FixtureShared::in_memory())
    }

    #[test]
    fn seventeen_tools_across_five_servers() {
        let shared = FixtureShared::in_memory();
        let corpus = Corpus::bundled();
        let total: usize = FixtureServer::all()
            .into_iter()
            .map(|w| build_server(w, &corpus, &shared).host().descriptors().len())
            .sum();
        assert_eq!(total, 17);
    }

    #[test]
    fn calculator_lists_five_descriptors() {
        let server = build(FixtureServer::Calculator);
        let names: Vec<String> = server
            .host()
            .descriptors()
            .into_iter()
            .map(|d| d.name)
            .collect();
        assert_eq!(names, ["min", "max", "mean", "median", "std"]);
    }

    #[test]
    fn download_pdf_unknown_title_is_error() {
        let server = build(FixtureServer::Arxiv);
        let r = call(&server, "download_pdf", json!({"title": "{title}"}));
        assert!(r.is_error);
        assert!(r.text().contains("not found"));
    }

    #[test]
    fn download_pdf_large_paper_becomes_blob() {
        let server = build(FixtureServer::Arxiv);
        let title = Corpus::bundled().papers().next().unwrap().title.clone();
        let r = call(&server, "download_pdf", json!({ "title": title }));
        assert!(!r.is_error);
        assert!(r.content[0].as_blob().is_some());
    }

    #[test]
    fn calculator_exact_values() {
        let server = build(FixtureServer::Calculator);
        let values = json!({"values": [4, 1, 3, 2]});
        assert_eq!(call(&server, "min", values.clone()).text(), "1");
        assert_eq!(call(&server, "max", values.clone()).text(), "4");
        assert_eq!(call(&server, "mean", values.clone()).text(), "2.5");
        assert_eq!(call(&server, "median", values.clone()).text(), "2.5");
        // Population std of [4,1,3,2] = sqrt(1.25).
        assert_eq!(
            call(&server, "std", values).text(),
            format_number(1.25_f64.sqrt())
        );
    }

    #[test]
    fn calculator_rejects_empty_and_non_numeric() {
        let server = build(FixtureServer::Calculator);
        assert!(call(&server, "mean", json!({"values": []})).is_error);
        assert!(call(&server, "mean", json!({"values": [1, "x"]})).is_error);
    }

    #[test]
    fn filter_matches_count_and_none_skipped() {
        let server = build(FixtureServer::LogAnalyzer);
        for log in Corpus::bundled().logs() {
            let keyword = log.keyword.clone().unwrap();
            let expected = log
                .body
                .lines()
                .filter(|l| l.contains(&keyword))
                .count();
            assert!(expected > 0);
            let counted = call(
                &server,
                "count_matches",
                json!({"file": log.title, "keyword": keyword}),
            );
            assert_eq!(counted.text(), expected.to_string());
            let filtered = call(
                &server,
                "filter_by_keyword",
                json!({"file": log.title, "keyword": keyword}),
            );
            assert!(!filtered.is_error);
            let text = match &filtered.content[0] {
                ContentItem::Text { text } => text.clone(),
                ContentItem::Blob { blob } => String::from_utf8(
                    server.host().blob_store().get_uri(&blob.uri).unwrap(),
                )
                .unwrap(),
            };
            let parsed: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(
                parsed["timestamps"].as_array().unwrap().len(),
                expected,
                "log {}",
                log.title
            );
            assert_eq!(parsed["skipped"], json!(0));
        }
    }

    #[test]
    fn filter_timestamps_are_monotone_epochs() {
        let server = build(FixtureServer::LogAnalyzer);
        let corpus = Corpus::bundled();
        let log = corpus.logs().next().unwrap();
        let r = call(
            &server,
            "filter_by_keyword",
            json!({"file": log.title, "keyword": log.keyword.clone().unwrap()}),
        );
        let text = match &r.content[0] {
            ContentItem::Text { text } => text.clone(),
            ContentItem::Blob { blob } => String::from_utf8(
                server.host().blob_store().get_uri(&blob.uri).unwrap(),
            )
            .unwrap(),
        };
        let parsed: Value = serde_json::from_str(&text).unwrap();
        let ts: Vec<i64> = parsed["timestamps"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_i64().unwrap())
            .collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
        assert!(ts.iter().all(|&t| t > 0));
    }

    #[test]
    fn summarizer_prefers_matching_sentences_in_order() {
        let text = "Alpha is first. The contributions here are two. Filler line one. \
                    More contributions and contributions again. Closing note.";
        let summary = extractive_summary(text, "core contributions", 5);
        assert_eq!(
            summary,
            "The contributions here are two. More contributions and contributions again."
        );
        let top1 = extractive_summary(text, "core contributions", 1);
        assert_eq!(summary.contains(&top1), true);
        assert_eq!(top1, "More contributions and contributions again.");
    }

    #[test]
    fn summarizer_rejects_empty_query() {
        let server = build(FixtureServer::Rag);
        let r = call(&server, "summarize_text", json!({"text": "Some text.", "query": " "}));
        assert!(r.is_error);
    }

    #[test]
    fn summarizer_resolves_blob_references() {
        let shared = FixtureShared::in_memory();
        let corpus = Corpus::bundled();
        let arxiv = build_server(FixtureServer::Arxiv, &corpus, &shared);
        let rag = build_server(FixtureServer::Rag, &corpus, &shared);
        let paper = corpus.papers().next().unwrap();
        let downloaded = arxiv
            .host()
            .handle_invocation(&ToolCallRequest::new(
                "d",
                "download_pdf",
                json!({"title": paper.title}),
            ));
        let blob = downloaded.content[0].as_blob().unwrap();
        let r = rag.host().handle_invocation(&ToolCallRequest::new(
            "s",
            "summarize_text",
            json!({"text": blob.uri, "query": "introduction"}),
        ));
        assert!(!r.is_error, "{}", r.text());
        assert!(r.text().to_lowercase().contains("introduction"));
        assert!(r.text().len() < 4000);
    }

    #[test]
    fn plot_returns_blob_and_is_deterministic() {
        let server = build(FixtureServer::Visualization);
        let args = json!({"series": {"a": [1, 2, 3], "b": [3, 1, 2]}, "kind": "line"});
        let one = call(&server, "plot", args.clone());
        assert!(!one.is_error);
        let blob = one.content[0].as_blob().unwrap().clone();
        assert_eq!(blob.content_type, "image/svg+xml");
        let svg = String::from_utf8(server.host().blob_store().get_uri(&blob.uri).unwrap())
            .unwrap();
        assert!(svg.starts_with("<svg"));
        // Content-hash addressing: identical input yields the identical uri.
        let again = call(&server, "plot", json!({"series": {"a": [1, 2, 3], "b": [3, 1, 2]}, "kind": "line"}));
        assert_eq!(again.content[0].as_blob().unwrap().uri, blob.uri);
    }

    #[test]
    fn plot_rejects_bad_kind_and_empty_series() {
        let server = build(FixtureServer::Visualization);
        assert!(call(&server, "plot", json!({"series": {"a": [1]}, "kind": "pie"})).is_error);
        assert!(call(&server, "plot", json!({"series": {}})).is_error);
    }

    #[test]
    fn unimplemented_tools_report_tool_errors() {
        let server = build(FixtureServer::Arxiv);
        let r = call(&server, "search_papers", json!({"query": "q"}));
        assert!(r.is_error);
        assert!(r.text().contains("not implemented"));
    }

    #[test]
    fn resolve_values_accepts_timestamp_payload() {
        let server = build(FixtureServer::Calculator);
        let r = call(
            &server,
            "mean",
            json!({"values": "{\"timestamps\": [10, 20, 30], \"skipped\": 0}"}),
        );
        assert_eq!(r.text(), "20");
    }

    #[test]
    fn format_number_shortest_forms() {
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(2.5), "2.5");
        assert_eq!(format_number(-0.0), "0");
    }
}
