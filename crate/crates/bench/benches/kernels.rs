use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use isometrica::harness::{random_extremal_pair, random_near_pair};
use isometrica::homotopy::{path_thm4, path_thm5};
use isometrica::numerics::hermitian_eig;
use isometrica::random::{gaussian_matrix, stream_rng};
use isometrica::{polar_pi, BlockOperator, ToleranceConfig};

fn eig(c: &mut Criterion) {
    let cfg = ToleranceConfig::default();
    let mut group = c.benchmark_group("hermitian_eig");
    for n in [4, 8, 16] {
        let g = gaussian_matrix(&mut stream_rng(1, n as u64), n, n);
        let h = g.adjoint().matmul(&g);
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| hermitian_eig(black_box(h), &cfg).unwrap())
        });
    }
    group.finish();
}

fn polar(c: &mut Criterion) {
    let cfg = ToleranceConfig::default();
    let mut group = c.benchmark_group("polar");
    for n in [4, 8, 16] {
        let a: BlockOperator = gaussian_matrix(&mut stream_rng(2, n as u64), n, n + 2).into();
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| polar_pi(black_box(a), &cfg).unwrap())
        });
    }
    group.finish();
}

fn paths(c: &mut Criterion) {
    let cfg = ToleranceConfig::default();
    let (u, v) = random_near_pair(&mut stream_rng(3, 0), 8, 0.95, &cfg).unwrap();
    c.bench_function("path_support_freeze", |b| {
        b.iter(|| path_thm4(black_box(&u), black_box(&v), 11, &cfg).unwrap())
    });
    let (u, v) = random_extremal_pair(&mut stream_rng(4, 0), 8, 1.9, &cfg).unwrap();
    c.bench_function("path_extremal_segment", |b| {
        b.iter(|| path_thm5(black_box(&u), black_box(&v), 11, &cfg).unwrap())
    });
}

criterion_group!(benches, eig, polar, paths);
criterion_main!(benches);
