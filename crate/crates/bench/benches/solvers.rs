use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use trapbec_core::special_functions::{polylog_exp_neg, zeta, PolylogOrder};
use trapbec_core::tridiagonal::SymTridiagonal;
use trapbec_core::{
    find_tc, ideal_state, make_gaussian_potential, run_suite, solve_hartree, solve_selfconsistent,
    xi_coefficient, HartreeOptions, SolverOptions, Suite, TcOptions,
};

fn special_functions(c: &mut Criterion) {
    c.bench_function("zeta(3)", |b| b.iter(|| zeta(black_box(3.0))));
    let order = PolylogOrder::from_s(1.5).unwrap();
    c.bench_function("polylog_exp_neg(3/2, 0.3)", |b| {
        b.iter(|| polylog_exp_neg(order, black_box(0.3)))
    });
}

fn semiclassical(c: &mut Criterion) {
    let v = make_gaussian_potential(1.0, 1.0).unwrap();
    c.bench_function("ideal_state", |b| {
        b.iter(|| ideal_state(black_box(0.8), 2.0))
    });
    let opts = SolverOptions::default();
    c.bench_function("solve_selfconsistent lambda=0.05", |b| {
        b.iter(|| solve_selfconsistent(black_box(0.6), 2.0, &v, 0.05, &opts))
    });
    let tc = TcOptions::default();
    c.bench_function("find_tc lambda=0.05", |b| {
        b.iter(|| find_tc(black_box(0.05), 2.0, &v, &tc))
    });
    c.bench_function("xi_coefficient", |b| {
        b.iter(|| xi_coefficient(black_box(2.0), &v))
    });
}

fn hartree(c: &mut Criterion) {
    let n = 2048;
    let t = SymTridiagonal::new((1..=n).map(|i| 2.0 + 1e-6 * (i * i) as f64).collect(), -1.0);
    c.bench_function("tridiagonal eigenvalues_below", |b| {
        b.iter(|| t.eigenvalues_below(black_box(0.05), &[], 1e-3))
    });

    let v = make_gaussian_potential(1.0, 1.0).unwrap().scaled(0.05);
    let opts = HartreeOptions {
        n_grid: 1024,
        ..Default::default()
    };
    let mut group = c.benchmark_group("hartree");
    group.sample_size(10);
    group.bench_function("solve_hartree N=256", |b| {
        b.iter(|| solve_hartree(black_box(256), 1.0, 2.0, &v, &opts))
    });
    group.finish();
}

fn inequalities(c: &mut Criterion) {
    let mut group = c.benchmark_group("inequality_lab");
    group.sample_size(10);
    group.bench_function("trace_convexity x100", |b| {
        b.iter(|| run_suite(Suite::TraceConvexity, black_box(7), Some(100)))
    });
    group.bench_function("berezin_lieb x4", |b| {
        b.iter(|| run_suite(Suite::BerezinLieb, black_box(7), Some(4)))
    });
    group.finish();
}

criterion_group!(
    benches,
    special_functions,
    semiclassical,
    hartree,
    inequalities
);
criterion_main!(benches);
