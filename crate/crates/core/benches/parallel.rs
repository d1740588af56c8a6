//! Sequential vs parallel execution of the crate's batch workloads.
//!
//! Run with `cargo bench -p areal`. The parallel cases need the default
//! `parallel` feature; `map_jobs(1, ..)` is the sequential fallback path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use areal::data::CovariateStructure;
use areal::exec::map_jobs;
use areal::sampler::McmcConfig;
use areal::simstudy::{run_grid, ExperimentGrid};
use areal::validate::run_validation;

fn bench_validation(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_validation");
    group.sample_size(10);
    // independent dense-LU cases spread over a worker pool by hand, since
    // run_validation itself is a single batch
    for workers in [1usize, 0] {
        group.bench_with_input(
            BenchmarkId::new("cases_64", if workers == 1 { "seq" } else { "par" }),
            &workers,
            |b, &w| {
                let chunks: Vec<u64> = (0..8).collect();
                b.iter(|| {
                    let reports =
                        map_jobs(w, &chunks, |&k| run_validation(8, 1000 + k, 0.0).unwrap());
                    assert!(reports.iter().all(|r| r.passed()));
                })
            },
        );
    }
    group.finish();
}

fn bench_grid(c: &mut Criterion) {
    let grid = ExperimentGrid {
        n_values: vec![16],
        rho_values: vec![0.9],
        tau2_values: vec![0.5],
        m_values: vec![2, 5, 10, 20],
        structures: vec![CovariateStructure::C2],
        replicates: 6,
        gamma: 0.05,
        mcmc: McmcConfig {
            iterations: 2_000,
            burn_in: 500,
            thin: 5,
            ..Default::default()
        },
        seed: 7,
    };
    let mut group = c.benchmark_group("simulation_grid");
    group.sample_size(10);
    group.bench_function("seq", |b| b.iter(|| run_grid(&grid, 1).unwrap()));
    group.bench_function("par", |b| b.iter(|| run_grid(&grid, 0).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_validation, bench_grid);
criterion_main!(benches);
