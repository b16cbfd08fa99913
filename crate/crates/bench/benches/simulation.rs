use criterion::{criterion_group, criterion_main, Criterion};
use hyfal_core::benchmarks::{by_name, NAMES};
use hyfal_core::{eval_robustness, simulate, simulate_with_sensitivity, SimOptions};
use std::hint::black_box;

fn models(c: &mut Criterion) {
    let opts = SimOptions::default();
    for name in NAMES {
        let b = by_name(name, &Default::default()).unwrap();
        let start = if b.space.contains(&b.start) { b.start.clone() } else { b.space.midpoint() };
        let x0 = start.x0_vector();
        let input = b.space.input_for(&start).unwrap();
        let mut g = c.benchmark_group(name);
        g.bench_function("simulate", |bn| {
            bn.iter(|| simulate(&b.automaton, black_box(&x0), &input, b.horizon, &opts).unwrap())
        });
        g.bench_function("simulate_with_sensitivity", |bn| {
            bn.iter(|| simulate_with_sensitivity(&b.automaton, black_box(&x0), &input, b.horizon, &opts).unwrap())
        });
        let traj = simulate(&b.automaton, &x0, &input, b.horizon, &opts).unwrap();
        g.bench_function("robustness", |bn| bn.iter(|| eval_robustness(&b.objective, black_box(&traj)).unwrap()));
        g.finish();
    }
}

criterion_group!(benches, models);
criterion_main!(benches);
