use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use cvdb::gauss::{outcome_table_by_overlap, outcome_table_closed_form, tripartite_state, TripartiteParams};
use cvdb::primitive::{direct_qflip_table, ContinuousSampler, DiscreteSampler};
use cvdb::full_run;
use cvdb_bench::{default_model, rng, run_config};

fn tables(c: &mut Criterion) {
    let model = default_model();
    let state = tripartite_state(&TripartiteParams::new(3.0, 1.0)).unwrap();
    c.bench_function("table/closed_form", |b| b.iter(|| outcome_table_closed_form(black_box(3.0), &model).unwrap()));
    c.bench_function("table/overlap", |b| b.iter(|| outcome_table_by_overlap(black_box(&state), &model).unwrap()));
    c.bench_function("table/qflip27", |b| b.iter(|| direct_qflip_table(black_box(3.0), &model).unwrap()));
}

fn samplers(c: &mut Criterion) {
    let model = default_model();
    let table = outcome_table_closed_form(3.0, &model).unwrap();
    let discrete = DiscreteSampler::new(&table).unwrap();
    let state = tripartite_state(&TripartiteParams::new(3.0, 1.0)).unwrap();
    let continuous = ContinuousSampler::new(&state, model).unwrap();
    let mut r = rng(1);
    c.bench_function("sample/discrete", |b| b.iter(|| discrete.sample(&mut r)));
    let mut r = rng(2);
    c.bench_function("sample/continuous", |b| b.iter(|| continuous.sample(&mut r)));
}

fn protocol(c: &mut Criterion) {
    let mut g = c.benchmark_group("protocol");
    g.sample_size(10);
    for m in [4_000u32, 20_000] {
        let cfg = run_config(m, 5);
        g.bench_function(format!("full_run/M={m}"), |b| b.iter(|| full_run(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, tables, samplers, protocol);
criterion_main!(benches);
