use criterion::{criterion_group, criterion_main, Criterion};
use mfdx_bench::msasm_records;
use mfdx_core::{aggregate_msasm, rank_bottlenecks};

fn msasm(c: &mut Criterion) {
    let (records, criteria) = msasm_records(500, 3);
    c.bench_function("aggregate_msasm/500", |b| b.iter(|| aggregate_msasm(&records, &criteria).unwrap()));
    let aggregates = aggregate_msasm(&records, &criteria).unwrap();
    c.bench_function("rank_bottlenecks/500", |b| b.iter(|| rank_bottlenecks(&aggregates)));
}

criterion_group!(benches, msasm);
criterion_main!(benches);
