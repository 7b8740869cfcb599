//! Benchmarks for the two hot paths — scenario analysis (belief filtering
//! plus causal replays) and coefficient fitting (grid search) — comparing
//! the data-parallel execution layer against a single-thread baseline.
//!
//! With the default `parallel` feature each workload runs once inside a
//! one-thread rayon pool and once inside a pool sized to the machine, so
//! the speedup (or overhead, on small inputs) is visible directly. Built
//! with `--no-default-features` the same workloads measure the sequential
//! fallback.

use std::path::Path;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use beliefrank::attribution::{fit, FactorSelection, FactorVector, GridResolution, DEFAULT_EPSILON};
use beliefrank::pipeline::{analyze, load_inputs};
use beliefrank::scenario::{load_scenario, Scenario};

fn scenario_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// Runs `work` once per pool configuration: a single thread and, if it
/// differs, one thread per available core.
#[cfg(feature = "parallel")]
fn per_pool(group: &mut criterion::BenchmarkGroup<'_, criterion::measurement::WallTime>, work: impl Fn() + Sync) {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1];
    if cores > 1 {
        sizes.push(cores);
    }
    for threads in sizes {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool should build");
        group.bench_function(format!("{threads}-thread"), |b| {
            b.iter(|| pool.install(&work))
        });
    }
}

#[cfg(not(feature = "parallel"))]
fn per_pool(group: &mut criterion::BenchmarkGroup<'_, criterion::measurement::WallTime>, work: impl Fn() + Sync) {
    group.bench_function("sequential", |b| b.iter(&work));
}

fn bench_analyze(c: &mut Criterion) {
    let sc: Scenario = load_scenario(scenario_path("08-hall-open-then-door.toml"))
        .expect("bench scenario should load");
    let mut group = c.benchmark_group("analyze/hall-336-atoms");
    group.sample_size(10).measurement_time(Duration::from_secs(8));
    per_pool(&mut group, || {
        black_box(analyze(black_box(&sc)).expect("analysis should succeed"));
    });
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let scenarios = load_inputs(scenario_path("manifest.toml")).expect("suite should load");
    let factors: Vec<Vec<FactorVector>> = scenarios
        .iter()
        .map(|sc| {
            let analysis = analyze(sc).expect("analysis should succeed");
            analysis.statements.iter().map(|s| s.factors).collect()
        })
        .collect();
    // A synthetic but non-degenerate target keeps the grid search honest
    // without shipping fitted data into the bench.
    let targets: Vec<Vec<f64>> = factors
        .iter()
        .map(|fs| {
            let n = fs.len() as f64;
            (1..=fs.len()).map(|r| r as f64 * 6.0 / (n * (n + 1.0))).collect()
        })
        .collect();
    let selection = FactorSelection {
        accuracy: true,
        informativity: true,
        ignorant_listener: false,
        necessity: false,
        sufficiency: false,
    };
    let mut group = c.benchmark_group("fit/coarse-2-factor");
    group.sample_size(10).measurement_time(Duration::from_secs(8));
    per_pool(&mut group, || {
        black_box(
            fit(
                black_box(&factors),
                black_box(&targets),
                &selection,
                GridResolution::Coarse,
                DEFAULT_EPSILON,
            )
            .expect("fit should succeed"),
        );
    });
    group.finish();
}

criterion_group!(benches, bench_analyze, bench_fit);
criterion_main!(benches);
