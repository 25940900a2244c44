//! Single-thread pool against the default pool on the hot paths. Build with
//! `--no-default-features` to time the sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use xsobolev::parallel::with_threads;
use xsobolev::{
    build_kernel_table, latent_loss_gradient, sample_normal_cloud, xs_energy_distance_sq, HsParams,
    QuadOrders, Seed, TableMethod, XiEvaluator, XiMethod,
};

fn pools() -> Vec<(&'static str, usize)> {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    vec![("1-thread", 1), ("default", default)]
}

fn energy_distance(c: &mut Criterion) {
    let a = sample_normal_cloud(8, 2000, Seed::new(1));
    let b = sample_normal_cloud(8, 2000, Seed::new(2));
    let mut group = c.benchmark_group("xs_energy_distance_sq/2000x8");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            with_threads(threads, || {
                bench.iter(|| xs_energy_distance_sq(black_box(&a), black_box(&b)).unwrap())
            })
        });
    }
    group.finish();
}

fn latent_gradient(c: &mut Criterion) {
    let codes = sample_normal_cloud(8, 4096, Seed::new(3));
    let ev = XiEvaluator::new(8, XiMethod::PoissonExact).unwrap();
    let mut group = c.benchmark_group("latent_loss_gradient/4096x8");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            with_threads(threads, || {
                bench.iter(|| latent_loss_gradient(black_box(&codes), &ev).unwrap())
            })
        });
    }
    group.finish();
}

fn kernel_table(c: &mut Criterion) {
    let params = HsParams::new(2.0, 4).unwrap();
    let mut group = c.benchmark_group("build_kernel_table/s2_N4_128");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |bench| {
            with_threads(threads, || {
                bench.iter(|| {
                    build_kernel_table(
                        params,
                        10.0,
                        128,
                        TableMethod::Quadrature(QuadOrders::default()),
                    )
                    .unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, energy_distance, latent_gradient, kernel_table);
criterion_main!(benches);
