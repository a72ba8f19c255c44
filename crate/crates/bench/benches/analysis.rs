use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use vnfchain::optimizer::{sweep_alpha, Objective};
use vnfchain::{analyze, SystemParams};

fn params(buffer: usize) -> SystemParams {
    SystemParams { p: 0.8, alpha: 0.5, mu: [0.5, 0.5, 0.5, 0.5, 0.5, 0.9], buffer: [buffer; 5] }
}

fn bench_analyze(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze");
    for m in [10, 50] {
        let p = params(m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &p, |b, p| {
            b.iter(|| analyze(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let p = params(10);
    c.bench_function("sweep_alpha/step0.05", |b| {
        b.iter(|| sweep_alpha(black_box(&p), 0.05, Objective::Drop).unwrap())
    });
}

criterion_group!(benches, bench_analyze, bench_sweep);
criterion_main!(benches);
