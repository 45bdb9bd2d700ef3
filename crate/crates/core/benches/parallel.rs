//! Sequential versus rayon execution for the two data-parallel hot spots:
//! pairwise momentLS fits inside one estimate, and benchmark replicates.
//!
//! Build with `--no-default-features` to confirm the parallel arm falls back
//! to sequential timings.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use momentvar::baselines::EstimatorConfig;
use momentvar::harness::{run_benchmark, BenchmarkConfig, ModelSpec};
use momentvar::multivar::{sigma_pw, tune_delta_vector, MomentlsOptions};
use momentvar::numerics::RngStream;
use momentvar::par::Execution;
use momentvar::simulate::{simulate_var1, Var1Preset};
use momentvar::Method;
use std::hint::black_box;

fn pairwise(c: &mut Criterion) {
    let model = Var1Preset::Mixed.build().unwrap();
    let chain = simulate_var1(&model, 20_000, &mut RngStream::new(1, 0)).unwrap();
    let deltas = tune_delta_vector(&chain, 5).unwrap();
    let mut group = c.benchmark_group("sigma_pw_d4_m20000");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let opts = MomentlsOptions {
            execution: exec,
            ..MomentlsOptions::default()
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &opts,
            |b, opts| b.iter(|| sigma_pw(black_box(&chain), &deltas, opts).unwrap()),
        );
    }
    group.finish();
}

fn replicates(c: &mut Criterion) {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let mut group = c.benchmark_group("harness_b8_m5000");
    group.sample_size(10);
    for workers in [1, threads.max(2)] {
        let config = BenchmarkConfig {
            model: ModelSpec::Var1 {
                preset: Some("1".into()),
                diagonal: None,
                off_diagonal: 0.0,
            },
            lengths: vec![5000],
            replicates: 8,
            methods: vec![
                EstimatorConfig::new(Method::MtvMlse),
                EstimatorConfig::new(Method::BatchMeans),
            ],
            alpha: 0.05,
            seed: 0,
            workers,
            timing: false,
        };
        group.bench_with_input(
            BenchmarkId::new("workers", workers),
            &config,
            |b, config| b.iter(|| run_benchmark(black_box(config)).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, pairwise, replicates);
criterion_main!(benches);
