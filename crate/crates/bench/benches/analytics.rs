use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use photoyear_core::analytics::{decade_stats, engagement, mode_accuracy, DecadeOptions};

fn analytics(c: &mut Criterion) {
    let catalog = photoyear_bench::catalog(20);
    let mut group = c.benchmark_group("analytics");
    for n in [1_000, 100_000] {
        let plays = photoyear_bench::plays(&catalog, n, 200, 9);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("decade_stats", n), &plays, |b, plays| {
            b.iter(|| decade_stats(black_box(plays), &[], &catalog, DecadeOptions { include_demo: true }).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mode_accuracy", n), &plays, |b, plays| {
            b.iter(|| mode_accuracy(black_box(plays)))
        });
        group.bench_with_input(BenchmarkId::new("engagement", n), &plays, |b, plays| {
            b.iter(|| engagement(black_box(plays)))
        });
    }
    group.finish();
}

criterion_group!(benches, analytics);
criterion_main!(benches);
