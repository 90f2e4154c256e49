use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pnpgl::estimators::{estimate_laplacian, estimate_pnp};
use pnpgl::graph_filter::{build_kernel, sinkhorn};
use pnpgl::pnp_admm::run;
use pnpgl::signals::apply_forward;
use pnpgl::spectral::eig_sym;
use pnpgl::{AdmmProblem, CeSolver, EstimatorConfig, ForwardModel};
use pnpgl_bench::{fixture, kernel};

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("eig_sym");
    for n in [64, 128, 256] {
        let (_, _, w) = fixture(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), w.matrix(), |b, m| {
            b.iter(|| eig_sym(black_box(m)).unwrap())
        });
    }
    g.finish();
}

fn filters(c: &mut Criterion) {
    let mut g = c.benchmark_group("sinkhorn");
    for n in [64, 256] {
        let (x, _, _) = fixture(n);
        let k = build_kernel(&x, &kernel()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &k, |b, k| {
            b.iter(|| sinkhorn(black_box(k)).unwrap())
        });
    }
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let (_, y, w) = fixture(256);
    w.decomp().unwrap();
    let cfg = EstimatorConfig::new(0.2, 0.05).unwrap();
    c.bench_function("estimate_laplacian/256", |b| {
        b.iter(|| estimate_laplacian(&y, &w, &cfg).unwrap())
    });
    c.bench_function("estimate_pnp/256", |b| {
        b.iter(|| estimate_pnp(&y, &w, &cfg).unwrap())
    });
}

fn equilibrium(c: &mut Criterion) {
    let (_, y, w) = fixture(128);
    let a = ForwardModel::random_mask(128, 0.5, 3).unwrap();
    let ya = apply_forward(&a, &y).unwrap();
    let solver = CeSolver::truncated(&a, &ya, &w, 1e-8).unwrap();
    c.bench_function("ce_solver_solve/128", |b| {
        b.iter(|| solver.solve(black_box(0.05)).unwrap())
    });

    let pb = AdmmProblem::new(ForwardModel::Identity(128), y.clone(), w.clone(), 0.2)
        .unwrap()
        .with_tol(1e-8);
    c.bench_function("admm_denoise/128", |b| b.iter(|| run(&pb).unwrap()));
}

criterion_group!(benches, spectral, filters, estimators, equilibrium);
criterion_main!(benches);
