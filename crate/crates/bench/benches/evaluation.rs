use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigbench::models::{train, Family, ModelSpec};
use sigbench::stats::{mcnemar, metrics, trimmed_mean};
use sigbench::Matrix;

fn blobs(n: usize, d: usize) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<u8> = (0..n).map(|i| u8::from(i % 10 == 0)).collect();
    let data = y
        .iter()
        .flat_map(|&c| (0..d).map(|j| rng.random::<f64>() + if j < 3 { c as f64 } else { 0.0 }).collect::<Vec<_>>())
        .collect();
    (Matrix::new(n, d, data), y)
}

fn training(c: &mut Criterion) {
    let (x, y) = blobs(2000, 32);
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for family in [Family::Logreg, Family::Gnb, Family::LinearSvm, Family::RandomForest, Family::Gbt, Family::Mlp] {
        let spec = ModelSpec::new(family);
        group.bench_function(family.to_string(), |b| b.iter(|| train(black_box(&spec), &x, &y, 1).unwrap()));
    }
    group.finish();
}

fn statistics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let truth: Vec<u8> = (0..40_000).map(|_| rng.random_range(0..2)).collect();
    let a: Vec<u8> = truth.iter().map(|&t| if rng.random_bool(0.1) { 1 - t } else { t }).collect();
    let b: Vec<u8> = truth.iter().map(|&t| if rng.random_bool(0.12) { 1 - t } else { t }).collect();
    c.bench_function("mcnemar/40000", |bench| bench.iter(|| mcnemar(black_box(&a), &b, &truth).unwrap()));
    c.bench_function("metrics/40000", |bench| bench.iter(|| metrics(black_box(&a), &truth, 1).unwrap()));
    let scores: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    c.bench_function("trimmed_mean/10", |bench| bench.iter(|| trimmed_mean(black_box(&scores)).unwrap()));
}

criterion_group!(benches, training, statistics);
criterion_main!(benches);
