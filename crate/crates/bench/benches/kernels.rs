use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use holder_hj::*;

fn hopf_lax(c: &mut Criterion) {
    let env = GrowthEnvelope::derive(2.0, 1.0, 0.0, 0.0, 0.0).unwrap();
    let mut group = c.benchmark_group("hopf_lax_step");
    for n in [201, 801] {
        let grid = UniformGrid::new(-2.0, 2.0, n).unwrap();
        let u: Vec<f64> = grid.nodes().map(|x| (x - 1.0).abs().powf(1.5)).collect();
        let opts = HopfLaxOptions { window: 1.0, refine: true };
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| hopf_lax_step(&grid, black_box(&u), 0.01, env.upper_kernel(), &opts).unwrap())
        });
    }
    group.finish();
}

fn value_solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_value_function");
    group.sample_size(10);
    let quad = VariationalProblem::new(|_, _| 1.0, |x| (x - 1.0) * (x - 1.0));
    group.bench_function("quadratic_201", |b| b.iter(|| solve_value_function(&quad, 201, 201).unwrap()));
    let spec = CounterexampleSpec::new(8, 0.75, 1.5).unwrap();
    let cubic = spec.problem().with_interpolation(value_solver::Interpolation::MonotoneCubic);
    group.bench_function("counterexample_n8_201_cubic", |b| {
        b.iter(|| solve_value_function(&cubic, 201, 201).unwrap())
    });
    group.finish();
}

fn threshold(c: &mut Criterion) {
    c.bench_function("theta_threshold", |b| {
        b.iter(|| theta_threshold(black_box(2.0), black_box(1.125), 0.95).unwrap())
    });
}

fn bridge(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_bridge");
    group.sample_size(10);
    let spec = BridgeSpec::new(vec![0.0], vec![0.0], 1.0, 1.5).unwrap();
    let sde = SdeSpec::scalar(1.0).unwrap();
    group.bench_function("1000_paths_dt_1e-3", |b| b.iter(|| simulate_bridge(&spec, &sde, 1e-3, 1000, 7).unwrap()));
    group.finish();
}

criterion_group!(benches, hopf_lax, value_solver, threshold, bridge);
criterion_main!(benches);
