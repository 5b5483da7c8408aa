use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use scaudit_bench::{noisy_matrix, noisy_split, tree_spec};
use scaudit_core::bootstrap::{build_prediction_matrix, ReplicatePlan};
use scaudit_core::classifiers::{fit, CostModel, ModelSpec};
use scaudit_core::ensemble::{simple_ensemble, AbstentionPolicy};
use scaudit_core::metrics::{sc_cdf, sc_grid, sc_profile, self_consistency, VoteCount};

fn metrics(c: &mut Criterion) {
    c.bench_function("self_consistency/B=101 all splits", |b| {
        b.iter(|| {
            (0..=101)
                .map(|b1| self_consistency(&VoteCount::new(101 - b1, b1, 0).unwrap()).unwrap())
                .sum::<f64>()
        })
    });
    c.bench_function("sc_grid/B=1001", |b| {
        b.iter(|| sc_grid(black_box(1001)).unwrap())
    });

    let matrix = noisy_matrix(2000, 101, 1);
    let profile = sc_profile(&matrix);
    c.bench_function("sc_profile/101x400", |b| {
        b.iter(|| sc_profile(black_box(&matrix)))
    });
    c.bench_function("w1/101x400", |b| {
        b.iter(|| {
            sc_cdf(black_box(&profile), matrix.test_groups(), 101, None)
                .unwrap()
                .group_distance()
                .unwrap()
        })
    });
    let policy = AbstentionPolicy::default();
    c.bench_function("simple_ensemble/101x400", |b| {
        b.iter(|| simple_ensemble(black_box(&matrix), &policy).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    for n in [500, 2000] {
        let (train, _) = noisy_split(n, 2);
        group.bench_with_input(BenchmarkId::new("tree depth 8", n), &train, |b, train| {
            b.iter(|| fit(&tree_spec(8), train, 0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("logistic", n), &train, |b, train| {
            b.iter(|| fit(&ModelSpec::default(), train, 0).unwrap())
        });
    }
    group.finish();

    let (train, test) = noisy_split(1000, 3);
    let plan = ReplicatePlan::new(21, 3).unwrap();
    c.bench_function("prediction_matrix/B=21 trees n=800", |b| {
        b.iter(|| {
            build_prediction_matrix(
                &train,
                &test,
                &tree_spec(8),
                &CostModel::default(),
                &plan,
                1,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, metrics, training);
criterion_main!(benches);
