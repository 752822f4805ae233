use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mflq::backward::{solve_mfbsde, BsdeOptions};
use mflq::forward::{simulate_mfsde, ControlInput, MeanMode};
use mflq::hamiltonian::{continuation_solve, CoupledSystem, HamiltonianOptions};
use mflq::spectral::{check_pd, DELTA_PD};
use mflq::ForcingTuple;
use mflq_bench::fixture;

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    for paths in [256, 1024] {
        let f = fixture(2, paths, 2.0, 0.01);
        g.bench_with_input(BenchmarkId::from_parameter(paths), &f, |b, f| {
            b.iter(|| simulate_mfsde(&f.spec, ControlInput::Zero, &ForcingTuple::none(), &f.bank, MeanMode::ExactMean).unwrap())
        });
    }
    g.finish();
}

fn backward(c: &mut Criterion) {
    let mut g = c.benchmark_group("bsde");
    for paths in [256, 1024] {
        let f = fixture(2, paths, 2.0, 0.01);
        let opts = BsdeOptions::default();
        g.bench_with_input(BenchmarkId::from_parameter(paths), &f, |b, f| {
            b.iter(|| solve_mfbsde(&f.spec, &f.state, None, 0.0, None, Some(&f.state), &f.bank, &opts).unwrap())
        });
    }
    g.finish();
}

fn continuation(c: &mut Criterion) {
    let mut g = c.benchmark_group("continuation");
    g.sample_size(10);
    let f = fixture(2, 128, 2.0, 0.02);
    let sys = CoupledSystem::new(&f.spec, f.weight_k).unwrap();
    let opts = HamiltonianOptions { exploratory: true, ..Default::default() };
    g.bench_function("n2_paths128", |b| b.iter(|| continuation_solve(&sys, &ForcingTuple::none(), &f.bank, &opts).unwrap()));
    g.finish();
}

fn definiteness(c: &mut Criterion) {
    let f = fixture(2, 1, 1.0, 0.1);
    c.bench_function("check_pd", |b| b.iter(|| check_pd(black_box(&f.spec.cost), DELTA_PD).unwrap()));
}

criterion_group!(benches, forward, backward, continuation, definiteness);
criterion_main!(benches);
