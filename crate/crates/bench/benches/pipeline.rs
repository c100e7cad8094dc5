//! Benchmarks for the numeric hot paths: transport solving, kernel
//! discrepancies, forest training, and one generator epoch.
//!
//! Run with `cargo bench -p rotda-bench`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rotda_core::forest::{fit_forest, predict_forest, ForestConfig};
use rotda_core::mmd::{kmm_weights, median_bandwidth, mmd2, KernelSpec};
use rotda_core::netgen::{gen_loss, GenLossWeights, GeneratorParams};
use rotda_core::ot::{barycentric_project, cost_matrix, sinkhorn, trim_plan};

fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
}

fn bench_transport(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = cloud(&mut rng, 500, 4);
    let t = cloud(&mut rng, 500, 4);
    let cost = cost_matrix(s.view(), t.view()).unwrap();
    let plan = sinkhorn(&cost, 0.1, 1000, 1e-9).unwrap();
    let trimmed = trim_plan(&plan, &cost, 0.8).unwrap();

    let mut group = c.benchmark_group("transport");
    group.sample_size(20);
    group.bench_function("cost_matrix_500x500", |b| {
        b.iter(|| cost_matrix(black_box(s.view()), black_box(t.view())).unwrap())
    });
    group.bench_function("sinkhorn_500x500_eps0.1", |b| {
        b.iter(|| sinkhorn(black_box(&cost), 0.1, 1000, 1e-9).unwrap())
    });
    group.bench_function("trim_plan_500x500_keep0.8", |b| {
        b.iter(|| trim_plan(black_box(&plan), black_box(&cost), 0.8).unwrap())
    });
    group.bench_function("barycentric_project_500x500", |b| {
        b.iter(|| {
            barycentric_project(black_box(&trimmed), black_box(t.view()), black_box(s.view()))
                .unwrap()
        })
    });
    group.finish();
}

fn bench_kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = cloud(&mut rng, 500, 4);
    let y = cloud(&mut rng, 500, 4);
    let kernel = KernelSpec::new(median_bandwidth(x.view(), y.view()));

    let mut group = c.benchmark_group("kernels");
    group.sample_size(20);
    group.bench_function("median_bandwidth_500", |b| {
        b.iter(|| median_bandwidth(black_box(x.view()), black_box(y.view())))
    });
    group.bench_function("mmd2_500x500", |b| {
        b.iter(|| mmd2(black_box(x.view()), black_box(y.view()), black_box(&kernel)).unwrap())
    });
    group.bench_function("kmm_weights_500_iters100", |b| {
        b.iter(|| {
            kmm_weights(
                black_box(x.view()),
                black_box(y.view()),
                black_box(&kernel),
                10.0,
                100,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn bench_forest(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = cloud(&mut rng, 500, 4);
    let y = Array1::from_shape_fn(500, |_| rng.random_range(-2.0..2.0));
    let weights = Array1::from_elem(500, 1.0);
    let config = ForestConfig {
        n_trees: 100,
        seed: 3,
        ..ForestConfig::default()
    };
    let model = fit_forest(x.view(), y.view(), weights.view(), &config).unwrap();
    let test = cloud(&mut rng, 1000, 4);

    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("fit_100_trees_500_rows", |b| {
        b.iter(|| fit_forest(black_box(x.view()), y.view(), weights.view(), &config).unwrap())
    });
    group.bench_function("predict_100_trees_1000_rows", |b| {
        b.iter(|| predict_forest(black_box(&model), black_box(test.view())).unwrap())
    });
    group.finish();
}

fn bench_generator(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t_s = cloud(&mut rng, 400, 4);
    let r_s = Array1::from_shape_fn(400, |_| rng.random_range(-1.0..1.0));
    let t_t = cloud(&mut rng, 400, 4);
    let t_t_lab = cloud(&mut rng, 100, 4);
    let r_t_lab = Array1::from_shape_fn(100, |_| rng.random_range(-1.0..1.0));
    let params = GeneratorParams::glorot(4, 32, 4);
    let weights = GenLossWeights::default();
    let kernel = KernelSpec::new(median_bandwidth(t_s.view(), t_t.view()));

    let mut group = c.benchmark_group("generator");
    group.sample_size(20);
    group.bench_function("gen_loss_epoch_400x400", |b| {
        b.iter(|| {
            gen_loss(
                black_box(&params),
                t_s.view(),
                r_s.view(),
                t_t.view(),
                t_t_lab.view(),
                r_t_lab.view(),
                &weights,
                &kernel,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_transport,
    bench_kernels,
    bench_forest,
    bench_generator
);
criterion_main!(benches);
