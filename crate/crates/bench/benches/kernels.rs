use std::sync::Arc;

use coexact::dec::{hodge_decompose, random_cochain, HodgeOperators};
use coexact::geometry::flat_torus_2d;
use coexact::isoperimetric::{cycle_from_path, minimal_spanning_chain, polyline_path};
use coexact::magflow::{integrate, FlowOptions};
use coexact::mane::{critical_value_hamiltonian, LinfOptions};
use coexact::shadow::{analyze, hypercycle};
use coexact::spectral::{coexact_spectrum, SpectralOptions};
use coexact_bench::{h2_uniform, sin_system, torus_ops};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("hodge_operators");
    for n in [16, 32, 64] {
        let mesh = Arc::new(flat_torus_2d(n, n, 1.0, 1.0).unwrap());
        g.bench_with_input(BenchmarkId::from_parameter(n), &mesh, |b, m| {
            b.iter(|| HodgeOperators::new(m.clone()).unwrap())
        });
    }
    g.finish();
}

fn decomposition(c: &mut Criterion) {
    let ops = torus_ops(32);
    let omega = random_cochain(ops.mesh(), 1, 1);
    c.bench_function("hodge_decompose_32", |b| b.iter(|| hodge_decompose(&ops, black_box(&omega)).unwrap()));
}

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("coexact_spectrum");
    g.sample_size(10);
    for n in [16, 32] {
        let ops = torus_ops(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &ops, |b, o| {
            b.iter(|| coexact_spectrum(o, 5, &SpectralOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn critical_value(c: &mut Criterion) {
    let mut g = c.benchmark_group("linf_critical_value");
    g.sample_size(10);
    for n in [8, 16] {
        let sys = sin_system(n, 0.5);
        g.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, s| {
            b.iter(|| critical_value_hamiltonian(s, &LinfOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let sys = h2_uniform(1.0);
    let opts = FlowOptions::default();
    c.bench_function("rk4_h2_100", |b| b.iter(|| integrate(&sys, &[0.0, 1.0], &[0.5, 0.0], 100.0, &opts).unwrap()));
}

fn shadowing(c: &mut Criterion) {
    let space = coexact::ModelSpace::Hyperbolic { dim: 2 };
    let traj = hypercycle(0.5, 40.0, 0.01);
    c.bench_function("shadow_hypercycle", |b| b.iter(|| analyze(&space, black_box(&traj), None).unwrap()));
}

fn spanning_chain(c: &mut Criterion) {
    let ops = torus_ops(32);
    let path = polyline_path(ops.mesh(), &[vec![1.0, 1.0], vec![3.0, 1.5], vec![2.0, 3.0]]).unwrap();
    let cycle = cycle_from_path(ops.mesh(), &path).unwrap();
    c.bench_function("minimal_spanning_chain_32", |b| b.iter(|| minimal_spanning_chain(&ops, &cycle).unwrap()));
}

criterion_group!(benches, operators, decomposition, spectrum, critical_value, flow, shadowing, spanning_chain);
criterion_main!(benches);
