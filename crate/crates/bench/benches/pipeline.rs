use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use moco_bench::Fixture;
use moco_core::{adjoint, cg_sense, forward, CgConfig, Fft2};

const SIZES: [usize; 3] = [64, 128, 256];

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft2c");
    for size in SIZES {
        let plan = Fft2::new(size, size);
        let x = Fixture::new(size, 1, 1, 0.0).complex_image();
        group.bench_with_input(BenchmarkId::from_parameter(size), &size, |b, _| {
            b.iter(|| plan.forward(black_box(&x)))
        });
    }
    group.finish();
}

fn encoding(c: &mut Criterion) {
    let mut group = c.benchmark_group("encoding");
    for size in [64, 128] {
        let f = Fixture::new(size, 4, 2, 10.0);
        let x = f.complex_image();
        let y = forward(&x, &f.maps, &f.pattern, &f.trajectory).unwrap();
        group.bench_with_input(BenchmarkId::new("forward", size), &size, |b, _| {
            b.iter(|| forward(black_box(&x), &f.maps, &f.pattern, &f.trajectory).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("adjoint", size), &size, |b, _| {
            b.iter(|| adjoint(black_box(&y), &f.maps, &f.pattern, &f.trajectory).unwrap())
        });
    }
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let mut group = c.benchmark_group("cg_sense");
    group.sample_size(20);
    let config = CgConfig::default();
    for size in SIZES {
        let f = Fixture::new(size, 4, 2, 10.0);
        group.bench_with_input(BenchmarkId::from_parameter(size), &size, |b, _| {
            b.iter(|| cg_sense(black_box(&f.kspace), &f.maps, &f.pattern, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fft, encoding, reconstruction);
criterion_main!(benches);
