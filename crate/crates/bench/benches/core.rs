use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use storypref_bench::{benchmark, instance_scores, rankings, sentence_lengths};
use storypref_core::dimcat::{categorize, DEFAULT_PRIORITY};
use storypref_core::evalharness::evaluate;
use storypref_core::kendall_tau;
use storypref_core::stylometrics::kurtosis;

fn kendall(c: &mut Criterion) {
    let mut group = c.benchmark_group("kendall_tau");
    for len in [4, 16, 64] {
        let rs = rankings(2, len, 1);
        group.bench_with_input(BenchmarkId::from_parameter(len), &rs, |b, rs| b.iter(|| kendall_tau(black_box(&rs[0]), black_box(&rs[1]))));
    }
    group.finish();
}

fn categorization(c: &mut Criterion) {
    let cases = instance_scores(1_000, 2);
    c.bench_function("categorize_1000", |b| {
        b.iter(|| {
            for s in &cases {
                black_box(categorize(black_box(s), 0.5, &DEFAULT_PRIORITY).expect("total"));
            }
        })
    });
}

fn kurtosis_bench(c: &mut Criterion) {
    let xs = sentence_lengths(10_000, 3);
    c.bench_function("kurtosis_10000", |b| b.iter(|| kurtosis(black_box(&xs))));
}

fn evaluation(c: &mut Criterion) {
    let (bench, rm) = benchmark(2_000, 4);
    c.bench_function("evaluate_2000", |b| b.iter(|| evaluate(black_box(&rm), black_box(&bench)).expect("non-empty")));
}

criterion_group!(benches, kendall, categorization, kurtosis_bench, evaluation);
criterion_main!(benches);
