use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kwell::domain::Domain;
use kwell::exec::Execution;
use kwell::functionals::ModelParams;
use kwell::wellgeometry::{estimate_sobolev_constant, verify_norm_thresholds, GeometrySettings};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sobolev_multistart(c: &mut Criterion) {
    let d = Domain::default_interval();
    let mut group = c.benchmark_group("sobolev_multistart");
    group.sample_size(10);
    for (name, exec) in MODES {
        let settings = GeometrySettings { exec, refine: false, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &settings, |b, s| {
            b.iter(|| black_box(estimate_sobolev_constant(&d, 5.0, s).unwrap().s_est))
        });
    }
    group.finish();
}

fn norm_threshold_sampling(c: &mut Criterion) {
    let d = Domain::default_interval();
    let p = ModelParams::reference();
    let mut group = c.benchmark_group("norm_threshold_sampling");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| black_box(verify_norm_thresholds(&d, &p, 1.0, 0.8094578, 1000, 3, exec).violations)));
    }
    group.finish();
}

criterion_group!(benches, sobolev_multistart, norm_threshold_sampling);
criterion_main!(benches);
