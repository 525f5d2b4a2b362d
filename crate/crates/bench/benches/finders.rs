use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ramsey_core::coloring::{type_coloring, Coloring, Scope};
use ramsey_core::finders::{
    find_bipartite, find_chains, find_comparable_pairs, find_incomparable_pairs, find_msubsets, oracle_best, Predicate,
    Strategy,
};
use ramsey_core::pigeonhole::php_find;
use ramsey_core::privacy::{reduce_from_ipp, IppInstance, LeftmostBranch, DEFAULT_THRESHOLD};
use ramsey_core::types::{enumerate_types, SubsetType};

fn left_pairs(n: u32, seed: u64) -> Coloring {
    Coloring::random(n, 2, 2, Scope::Type(SubsetType::parse("la").unwrap()), seed).unwrap()
}

fn pigeonhole(c: &mut Criterion) {
    let mut g = c.benchmark_group("php_find");
    for n in [12u32, 16, 20] {
        let vc = Coloring::random(n, 1, 3, Scope::All, 1).unwrap();
        let budgets = [n / 3, n / 3, n - 2 * (n / 3)];
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| php_find(vc.host(), black_box(&vc), &budgets).unwrap())
        });
    }
    g.finish();
}

fn pair_finders(c: &mut Criterion) {
    let mut g = c.benchmark_group("pairs");
    for n in [8u32, 12, 16] {
        let col = left_pairs(n, 2);
        g.bench_with_input(BenchmarkId::new("comparable", n), &n, |b, _| {
            b.iter(|| find_comparable_pairs(black_box(&col)).unwrap())
        });
    }
    for n in [6u32, 8] {
        let col = Coloring::random(n, 2, 2, Scope::Type(SubsetType::parse("maa").unwrap()), 3).unwrap();
        g.bench_with_input(BenchmarkId::new("incomparable", n), &n, |b, _| {
            b.iter(|| find_incomparable_pairs(black_box(&col)).unwrap())
        });
    }
    let cross = Coloring::random(
        0,
        2,
        2,
        Scope::Cross {
            left_depth: 8,
            right_depth: 8,
        },
        4,
    )
    .unwrap();
    g.bench_function("bipartite/8x8", |b| {
        b.iter(|| find_bipartite(black_box(&cross)).unwrap())
    });
    g.finish();
}

fn general_finders(c: &mut Criterion) {
    let mut g = c.benchmark_group("subsets");
    g.sample_size(10);
    for (m, n) in [(2usize, 6u32), (3, 6)] {
        let col = Coloring::random(n, m, 2, Scope::Chains, 5).unwrap();
        g.bench_with_input(BenchmarkId::new("chains", format!("m{m}n{n}")), &n, |b, _| {
            b.iter(|| find_chains(black_box(&col)).unwrap())
        });
    }
    let col = type_coloring(5, 2);
    g.bench_function("msubsets/type-coloring", |b| {
        b.iter(|| find_msubsets(black_box(&col), Strategy::Constructive).unwrap())
    });
    let col = left_pairs(6, 6);
    g.bench_function("oracle/left-pairs-6", |b| {
        b.iter(|| oracle_best(black_box(&col), Predicate::Monochromatic).unwrap())
    });
    g.bench_function("types/enumerate-5", |b| b.iter(|| enumerate_types(black_box(5))));
    g.finish();
}

fn reduction(c: &mut Criterion) {
    let inst = IppInstance::new(4096, (1..=10).map(|i| 400 * i).collect()).unwrap();
    c.bench_function("reduce/leftmost-4096", |b| {
        b.iter(|| reduce_from_ipp(&LeftmostBranch, black_box(&inst), 1, DEFAULT_THRESHOLD).unwrap())
    });
}

criterion_group!(benches, pigeonhole, pair_finders, general_finders, reduction);
criterion_main!(benches);
