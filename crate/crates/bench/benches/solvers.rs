use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use milspend_bench::us_like;
use milspend_core::scenario::TEMPORARY_RHO;
use milspend_core::{
    government_path, solve_steady, solve_transition, Preset, ScenarioSpec, SolverOptions,
};

fn steady(c: &mut Criterion) {
    let calib = us_like();
    let g = government_path(&ScenarioSpec::preset(Preset::Baseline, 1.0, 1.0), &calib).unwrap();
    c.bench_function("steady_41_industries", |b| {
        b.iter(|| solve_steady(black_box(&calib), black_box(&g.impact)).unwrap())
    });
}

fn transition(c: &mut Criterion) {
    let calib = us_like();
    let g = government_path(
        &ScenarioSpec::preset(Preset::Baseline, 1.0, TEMPORARY_RHO),
        &calib,
    )
    .unwrap();
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("transition");
    group.sample_size(10);
    group.bench_function("temporary_T200", |b| {
        b.iter(|| solve_transition(black_box(&calib), black_box(&g), 200, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, steady, transition);
criterion_main!(benches);
