use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fraclap::{assemble_direct_matrix, GradedMesh, Scheme};
use fraclap_bench::{operator, test_vector};
use std::hint::black_box;

fn fast_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_fast");
    for exp in [10, 12, 14, 16] {
        let n = 1usize << exp;
        let op = operator(n, 1.0, 0.5, Scheme::Original);
        let v = test_vector(n - 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter(|| op.apply_fast(black_box(v)))
        });
    }
    group.finish();
}

fn dense_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_dense");
    for exp in [10, 12] {
        let n = 1usize << exp;
        let mesh = GradedMesh::new(0.0, 2.0, n, 1.0).unwrap();
        let a = assemble_direct_matrix(&mesh, 0.5).unwrap();
        let v = test_vector(n - 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &v, |b, v| {
            b.iter(|| a.matvec(black_box(v)))
        });
    }
    group.finish();
}

criterion_group!(benches, fast_apply, dense_apply);
criterion_main!(benches);
