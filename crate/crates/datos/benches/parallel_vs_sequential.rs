//! Row-parallel dispatch vs. the sequential fallback on the workloads the
//! solvers actually run: per-agent gradient + line-search sweeps, and full
//! shared-stepsize iterations under different pool sizes.
//!
//! Run with the default features for the rayon-backed `map_rows`; with
//! `--no-default-features` both sides collapse to the plain loop and the
//! comparison becomes a sanity baseline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use datos::exec::{map_rows, map_rows_seq};
use datos::graph::Graph;
use datos::linesearch::backtrack;
use datos::mixing::MixingMatrix;
use datos::problems::{gen_regression_instance, CompositeProblem};
use datos::solvers::{global_datos_step, GlobalState};

const M: usize = 32;
const N: usize = 40;
const D: usize = 64;

fn workload() -> (CompositeProblem, Array2<f64>) {
    let prob = gen_regression_instance(M, N, D, 0.1, 0.01, 0.05, 11)
        .unwrap()
        .problem;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let x = Array2::from_shape_simple_fn((M, D), &mut draw);
    (prob, x)
}

/// One agent's share of a solver iteration: gradient at its row plus a
/// backtracking ladder along the negative gradient.
fn agent_task(prob: &CompositeProblem, x: &Array2<f64>, i: usize) -> f64 {
    let row = x.row(i);
    let grad = prob.loss(i).gradient(row);
    let dir = grad.mapv(|g| -g);
    backtrack(10.0, prob.loss(i), row, row, dir.view(), 0.9)
        .map(|r| r.alpha)
        .unwrap_or(0.0)
}

fn bench_per_agent_sweep(c: &mut Criterion) {
    let (prob, x) = workload();
    let mut group = c.benchmark_group("per_agent_gradient_and_linesearch");
    group.bench_function("map_rows", |b| {
        b.iter(|| map_rows(M, |i| agent_task(&prob, &x, i)))
    });
    group.bench_function("map_rows_seq", |b| {
        b.iter(|| map_rows_seq(M, |i| agent_task(&prob, &x, i)))
    });
    group.finish();

    // The two dispatchers must agree bitwise, or the benchmark compares
    // different computations.
    let par = map_rows(M, |i| agent_task(&prob, &x, i));
    let seq = map_rows_seq(M, |i| agent_task(&prob, &x, i));
    assert_eq!(par, seq);
}

fn bench_global_step_pools(c: &mut Criterion) {
    let (prob, x0) = workload();
    let graph = Graph::erdos_renyi(M, 0.4, 13).unwrap();
    let mix = MixingMatrix::metropolis(graph, 1.0 / 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let s0 = Array2::from_shape_simple_fn((M, D), &mut draw);
    let state = GlobalState::new(x0, s0, 10.0).unwrap();

    let mut group = c.benchmark_group("global_step");
    for threads in [1usize, 2, 4] {
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            group.bench_with_input(
                BenchmarkId::new("threads", threads),
                &threads,
                |b, _| {
                    b.iter(|| {
                        pool.install(|| global_datos_step(&state, &prob, &mix, 0.9).unwrap())
                    })
                },
            );
        }
        #[cfg(not(feature = "parallel"))]
        {
            group.bench_with_input(
                BenchmarkId::new("sequential", threads),
                &threads,
                |b, _| b.iter(|| global_datos_step(&state, &prob, &mix, 0.9).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, bench_per_agent_sweep, bench_global_step_pools);
criterion_main!(benches);
