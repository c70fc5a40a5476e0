use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use powerlimits::preimage::preimage_sorted;
use powerlimits::torus::{fourier_pushforward, grid_pushforward, to_grid, Reconstruction};
use powerlimits::{eigenangles, haar_sample, power, GroupDescriptor};
use powerlimits_bench::{density_t2, haar_batch, rng};

fn groups() -> Vec<GroupDescriptor> {
    vec![
        GroupDescriptor::unitary(2).unwrap(),
        GroupDescriptor::unitary(4).unwrap(),
        GroupDescriptor::special_unitary(3).unwrap(),
        GroupDescriptor::special_orthogonal(5).unwrap(),
    ]
}

fn bench_haar(c: &mut Criterion) {
    let mut group = c.benchmark_group("haar_sample");
    for d in groups() {
        let mut r = rng();
        group.bench_function(BenchmarkId::from_parameter(d.name()), |b| {
            b.iter(|| haar_sample(black_box(&d), &mut r).unwrap())
        });
    }
    group.finish();
}

fn bench_spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for d in groups() {
        let g = haar_batch(&d, 1).pop().unwrap();
        group.bench_function(BenchmarkId::new("eigenangles", d.name()), |b| {
            b.iter(|| eigenangles(black_box(&g)).unwrap())
        });
        group.bench_function(BenchmarkId::new("power_64", d.name()), |b| {
            b.iter(|| power(black_box(&g), 64).unwrap())
        });
        group.bench_function(BenchmarkId::new("preimage_sorted", d.name()), |b| {
            b.iter(|| preimage_sorted(black_box(&g)).unwrap())
        });
    }
    group.finish();
}

fn bench_pushforward(c: &mut Criterion) {
    let density = density_t2();
    let grid = to_grid(&density, 360).unwrap();
    let mut group = c.benchmark_group("pushforward");
    for m in [2u64, 6] {
        group.bench_function(BenchmarkId::new("fourier", m), |b| {
            b.iter(|| fourier_pushforward(black_box(&density), m).unwrap())
        });
        for (name, rec) in [
            ("grid_step", Reconstruction::Step),
            ("grid_band_limited", Reconstruction::BandLimited),
        ] {
            group.bench_function(BenchmarkId::new(name, m), |b| {
                b.iter(|| grid_pushforward(black_box(&grid), m, rec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_haar, bench_spectral, bench_pushforward);
criterion_main!(benches);
