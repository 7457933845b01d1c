use criterion::{black_box, criterion_group, criterion_main, Criterion};
use pyrlite::engine::replay;
use pyrlite::sqlfront::Session;
use pyrlite_bench::{numbered_table, Fixture, ABC, SALES};

fn commits(c: &mut Criterion) {
    let f = Fixture::new("create table t (id int primary key, v int)");
    let mut s = f.session();
    let mut k = 0;
    c.bench_function("autocommit_insert", |b| {
        b.iter(|| {
            k += 1;
            s.execute(&format!("insert into t values ({k}, {k})")).unwrap()
        })
    });
}

fn queries(c: &mut Criterion) {
    let f = numbered_table(10_000);
    let mut s: Session = f.session();
    c.bench_function("select_by_key_10k", |b| b.iter(|| black_box(s.execute("select v from t where id = 4242").unwrap())));
    c.bench_function("select_filtered_scan_10k", |b| b.iter(|| black_box(s.execute("select id from t where g = 3").unwrap())));
    c.bench_function("aggregate_10k", |b| b.iter(|| black_box(s.execute("select count(*), sum(v), max(v) from t").unwrap())));
    let abc = Fixture::new(SALES);
    let mut s = abc.session();
    c.bench_function("sales_abc", |b| b.iter(|| black_box(s.execute(ABC).unwrap())));
}

fn cold_start(c: &mut Criterion) {
    let f = numbered_table(10_000);
    let bytes = f.engine.log_bytes().unwrap();
    c.bench_function("replay_10k_rows", |b| b.iter(|| black_box(replay(&bytes, "B").unwrap())));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = commits, queries, cold_start
}
criterion_main!(benches);
