use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use funflow::bandwidth::{cv_from_distances, BandwidthPlan, CvGrid, CvProfile, DistanceMatrix, ScaleMode};
use funflow::curves::simulate_regression_sample;
use funflow::estimator::{batch_estimate_distances, EstimatorConfig, Kernel, QueryState};
use funflow::experiments::{mspe_study, ExperimentConfig, MspeCell};
use funflow::parallel::Execution;
use funflow::seminorms::{coordinate_distance, FittedSemiNorm, SemiNormSpec};

fn replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("mspe_study");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let cfg = ExperimentConfig {
            replications: 64,
            execution,
            ..ExperimentConfig::default()
        };
        let cells = [MspeCell::from_config(&cfg, 100), MspeCell::from_config(&cfg, 200)];
        group.bench_function(BenchmarkId::from_parameter(format!("{execution:?}").to_lowercase()), |b| {
            b.iter(|| mspe_study(black_box(&cfg), &cells).unwrap())
        });
    }
    group.finish();
}

fn cross_validation(c: &mut Criterion) {
    let data = simulate_regression_sample(200, 100, 0.1, 3).unwrap();
    let sn = FittedSemiNorm::fit(SemiNormSpec::pca(3), &data).unwrap();
    let dist = DistanceMatrix::new(&sn, &data).unwrap();
    let y = data.responses().unwrap();
    let grid = CvGrid::default();
    let mut group = c.benchmark_group("cv_grid");
    for execution in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(BenchmarkId::from_parameter(format!("{execution:?}").to_lowercase()), |b| {
            b.iter(|| {
                cv_from_distances(&dist, y, &grid, 0.0, Kernel::quadratic(), CvProfile::Recursive, execution).unwrap()
            })
        });
    }
    group.finish();
}

/// Cost of absorbing one arrival: a recursive update against recomputing the
/// fixed-bandwidth estimate from all curves.
fn arrival(c: &mut Criterion) {
    let mut group = c.benchmark_group("arrival");
    for n in [100, 400, 1600] {
        let data = simulate_regression_sample(n + 1, 100, 0.1, 5).unwrap();
        let sn = FittedSemiNorm::fit(SemiNormSpec::pca(3), &data).unwrap();
        let query = &data.curves()[n];
        let y = data.responses().unwrap();
        let initial = data.prefix(n).unwrap();
        let state = QueryState::init(query, &initial, EstimatorConfig::default(), sn.clone()).unwrap();
        group.bench_with_input(BenchmarkId::new("recursive", n), &n, |b, _| {
            b.iter_batched(
                || state.clone(),
                |mut s| {
                    s.update(&data.curves()[0], y[0]).unwrap();
                    s.predict().ok()
                },
                criterion::BatchSize::SmallInput,
            )
        });
        group.bench_with_input(BenchmarkId::new("refit", n), &n, |b, _| {
            b.iter(|| {
                let q = sn.project(query).unwrap();
                let coords = sn.project_all(initial.curves()).unwrap();
                let d: Vec<f64> = coords.iter().map(|x| coordinate_distance(&q, x)).collect();
                let s = d.iter().cloned().fold(0.0, f64::max);
                let h = BandwidthPlan::new(1.0, 0.1, ScaleMode::Sample).unwrap().bandwidth(s, n);
                batch_estimate_distances(&d, &y[..n], Kernel::quadratic(), h).ok()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replications, cross_validation, arrival);
criterion_main!(benches);
