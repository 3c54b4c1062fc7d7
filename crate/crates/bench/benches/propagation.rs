use afcsim_core::benchmark::classical_bound;
use afcsim_core::propagation::{afc_efficiency_analytic, extract_echo, propagate};
use afcsim_core::spectrum::{build_comb_analytic, CombSpec};
use afcsim_core::FieldEnvelope;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_propagation(c: &mut Criterion) {
    let spec = CombSpec::paper_default();
    let grid = build_comb_analytic(&spec, 20.0, None).unwrap();
    let input = FieldEnvelope::gaussian(0.43, 2.0, 0.01, 20.0).unwrap();

    c.bench_function("comb_build", |b| {
        b.iter(|| build_comb_analytic(black_box(&spec), 20.0, None).unwrap())
    });
    c.bench_function("propagate_comb", |b| {
        b.iter(|| propagate(black_box(&input), black_box(&grid)).unwrap())
    });
    let out = propagate(&input, &grid).unwrap();
    c.bench_function("extract_echo", |b| {
        b.iter(|| extract_echo(black_box(&out), black_box(&input), 7.0, 0.7).unwrap())
    });
    c.bench_function("afc_efficiency_analytic", |b| {
        b.iter(|| afc_efficiency_analytic(black_box(&spec)))
    });
}

fn bench_classical_bound(c: &mut Criterion) {
    c.bench_function("classical_bound", |b| {
        b.iter(|| classical_bound(black_box(1.5), black_box(0.022)).unwrap())
    });
}

criterion_group!(benches, bench_propagation, bench_classical_bound);
criterion_main!(benches);
