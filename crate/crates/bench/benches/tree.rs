use criterion::{black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use pyrlite::PTree;

fn build(n: i64) -> PTree<i64, i64> {
    (0..n).fold(PTree::new(), |t, k| t.add(k, k))
}

fn insert(c: &mut Criterion) {
    let mut g = c.benchmark_group("ptree_insert");
    for n in [1_000i64, 10_000, 100_000] {
        let t = build(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| b.iter(|| black_box(t.add(n / 2 + 1, 0))));
    }
    g.finish();
}

fn lookup(c: &mut Criterion) {
    let t = build(100_000);
    c.bench_function("ptree_get_100k", |b| {
        let mut k = 0;
        b.iter(|| {
            k = (k + 7_919) % 100_000;
            black_box(t.get(&k))
        })
    });
}

fn walk(c: &mut Criterion) {
    let t = build(100_000);
    c.bench_function("ptree_walk_100k", |b| b.iter(|| black_box(t.iter().count())));
}

fn versions(c: &mut Criterion) {
    c.bench_function("ptree_keep_1000_versions", |b| {
        b.iter_batched(
            || build(10_000),
            |t| {
                let mut kept = vec![t];
                for k in 0..1_000 {
                    let next = kept.last().unwrap().add(10_000 + k, k);
                    kept.push(next);
                }
                black_box(kept.len())
            },
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, insert, lookup, walk, versions);
criterion_main!(benches);
