use std::path::Path;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lanexit_core::sim::{run_scenario, Scenario};
use lanexit_core::{next_sample_depth, par, DepthErrorModel, SamplingPlan, ScenarioConfig};

fn plans() -> Vec<(SamplingPlan, f64)> {
    let model = DepthErrorModel::new(0.002797, -0.004249, 0.007311, 0.9).unwrap();
    let mut jobs = Vec::new();
    for e in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let plan = SamplingPlan::new(e, model).unwrap();
        for k in 0..4_000 {
            jobs.push((plan, 5.0 + k as f64 * 0.035));
        }
    }
    jobs
}

fn scenarios() -> Vec<Scenario> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/two_intersections.toml");
    (0..32)
        .map(|seed| {
            let mut cfg = ScenarioConfig::from_file(&path).unwrap();
            cfg.seed = seed;
            Scenario::from_config(cfg, path.parent()).unwrap()
        })
        .collect()
}

fn sampling_sweep(c: &mut Criterion) {
    let jobs = plans();
    let mut g = c.benchmark_group("sampling_plan_sweep");
    let work = |&(plan, x1): &(SamplingPlan, f64)| next_sample_depth(&plan, x1).ok();
    g.bench_with_input(BenchmarkId::new("sequential", jobs.len()), &jobs, |b, j| {
        b.iter(|| par::map_sequential(black_box(j), work))
    });
    g.bench_with_input(BenchmarkId::new("parallel", jobs.len()), &jobs, |b, j| {
        b.iter(|| par::map(black_box(j), work))
    });
    g.finish();
}

fn scenario_batch(c: &mut Criterion) {
    let batch = scenarios();
    let mut g = c.benchmark_group("scenario_batch");
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("sequential", batch.len()), &batch, |b, s| {
        b.iter(|| par::map_sequential(black_box(s), run_scenario))
    });
    g.bench_with_input(BenchmarkId::new("parallel", batch.len()), &batch, |b, s| {
        b.iter(|| par::map(black_box(s), run_scenario))
    });
    g.finish();
}

criterion_group!(benches, sampling_sweep, scenario_batch);
criterion_main!(benches);
