use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use serde_json::json;

use fame_core::gateway::ModelPricing;
use fame_core::harness::{inputs, run_cell, AppKind};
use fame_core::host::{cache_key, canonical_json};
use fame_core::memory::MemoryConfig;
use fame_core::metrics::FaasRates;
use fame_core::sim::{
    build_plan, log_tools, research_tools, simulate, PackingMode, SimParams, WorkloadSpec,
};

fn bench_cache_key(c: &mut Criterion) {
    let args = json!({
        "file": "hadoop.log",
        "keyword": "ERROR",
        "options": {
            "window": [3, 5, 8],
            "nested": {"alpha": true, "beta": null, "gamma": "x".repeat(64)}
        },
        "values": [1.5, -3.25, 7.0, 0.125, 99.5]
    });
    let map = args.as_object().unwrap().clone();
    c.bench_function("cache_key", |b| {
        b.iter(|| cache_key("filter", &map).unwrap())
    });
    c.bench_function("canonical_json", |b| b.iter(|| canonical_json(&args).unwrap()));
}

fn bench_simulate(c: &mut Criterion) {
    let workload = WorkloadSpec::default();
    let params = SimParams::default();
    let rates = FaasRates::default();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    for (label, mode) in [
        ("singleton", PackingMode::Singleton),
        ("consolidated", PackingMode::Consolidated),
    ] {
        let plan = build_plan(mode, &research_tools()).unwrap();
        group.bench_function(label, |b| {
            b.iter(|| simulate(&plan, &workload, &params, &rates))
        });
    }
    let plan = build_plan(PackingMode::Consolidated, &log_tools()).unwrap();
    group.bench_function("logs-consolidated", |b| {
        b.iter(|| simulate(&plan, &workload, &params, &rates))
    });
    group.finish();
}

fn bench_session(c: &mut Criterion) {
    let pricing = ModelPricing::default();
    let rates = FaasRates::default();
    let corpus = fame_core::fixtures::Corpus::bundled();
    let research_input = inputs(AppKind::Research, &corpus).remove(0);
    let logs_input = inputs(AppKind::Logs, &corpus).remove(0);
    let mut group = c.benchmark_group("session");
    group.sample_size(20);
    group.bench_function("research-mc", |b| {
        b.iter_batched(
            || research_input.clone(),
            |input| {
                run_cell(
                    AppKind::Research,
                    &input,
                    MemoryConfig::M_PLUS_C,
                    &pricing,
                    &rates,
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.bench_function("logs-none", |b| {
        b.iter_batched(
            || logs_input.clone(),
            |input| {
                run_cell(AppKind::Logs, &input, MemoryConfig::N, &pricing, &rates).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_cache_key, bench_simulate, bench_session);
criterion_main!(benches);
