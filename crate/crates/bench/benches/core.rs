use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fdr_bench::{decay, generator, ns3};
use fdr_core::noarb::solve_drift;
use fdr_core::sim::{simulate, RnDriftCache};
use fdr_core::{CurveFamily, GaussianExampleModel, SdeSpec, XGrid};
use nalgebra::DMatrix;

fn mat_exp(c: &mut Criterion) {
    let mut group = c.benchmark_group("mat_exp");
    for n in [2, 4, 8, 16] {
        let a = generator(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| fdr_core::qe::mat_exp(black_box(a), black_box(1.7)).unwrap())
        });
    }
    group.finish();
}

fn drift(c: &mut Criterion) {
    let grid = XGrid::default();
    let ns3 = ns3();
    let eye3 = DMatrix::identity(3, 3);
    c.bench_function("solve_drift/ns3", |b| {
        b.iter(|| solve_drift(&ns3, black_box(&[0.1, -0.2, 0.3]), &eye3, &grid).unwrap())
    });
    let eye1 = DMatrix::identity(1, 1);
    c.bench_function("solve_drift/gaussian", |b| {
        b.iter(|| solve_drift(&GaussianExampleModel, black_box(&[0.2]), &eye1, &grid).unwrap())
    });
}

fn paths(c: &mut Criterion) {
    let sigma = DMatrix::from_element(1, 1, 1.0);
    let model: Arc<dyn CurveFamily> = Arc::new(decay());
    let cache = RnDriftCache::new(model, &sigma, XGrid::default()).unwrap();
    let spec = SdeSpec::new(Arc::new(cache), sigma, vec![1.0]).unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    group.bench_function("decay/1000x1000", |b| {
        b.iter(|| simulate(&spec, 1e-3, 1.0, black_box(1000), 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, mat_exp, drift, paths);
criterion_main!(benches);
