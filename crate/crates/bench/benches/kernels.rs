use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qmetro_core::band::{chern_number, qgt_analytic, qgt_fidelity, quantum_volume};
use qmetro_core::bounds::{classical_fim, holevo_bound, holevo_variational, jacobian_weight};
use qmetro_core::estimation::{mle_estimate, sample_outcomes};
use qmetro_core::band::excited_state;
use qmetro_core::optimizer::optimize_det_fim;
use qmetro_core::povm::trine_povm;
use qmetro_core::BlochPoint;

fn geometry(c: &mut Criterion) {
    let p = BlochPoint::new(1.0, 0.5, 1.0);
    c.bench_function("qgt_analytic", |b| b.iter(|| qgt_analytic(black_box(&p))));
    c.bench_function("qgt_fidelity", |b| b.iter(|| qgt_fidelity(black_box(&p), 1e-3)));
    c.bench_function("chern_number_32", |b| b.iter(|| chern_number(black_box(1.0), 32)));
    c.bench_function("quantum_volume_64", |b| b.iter(|| quantum_volume(black_box(1.0), 64)));
}

fn bounds(c: &mut Criterion) {
    let p = BlochPoint::new(1.0, 0.5, 1.0);
    let trine = trine_povm();
    let w = jacobian_weight(&p).unwrap();
    c.bench_function("classical_fim_trine", |b| b.iter(|| classical_fim(black_box(&trine), &p)));
    c.bench_function("holevo_closed_form", |b| b.iter(|| holevo_bound(black_box(&w), &p)));
    c.bench_function("holevo_variational", |b| b.iter(|| holevo_variational(black_box(&w), &p)));
}

fn estimation(c: &mut Criterion) {
    let p = BlochPoint::new(1.0, 0.5, 1.0);
    let trine = trine_povm();
    let psi = excited_state(&p).unwrap();
    let record = sample_outcomes(&trine, &psi, 10_000, 3).unwrap();
    c.bench_function("mle_trine_1e4", |b| {
        b.iter(|| mle_estimate(black_box(&trine), &record, 1.0, [1.0, 0.5]))
    });
}

fn optimizer(c: &mut Criterion) {
    let p = BlochPoint::new(1.0, 0.5, 1.0);
    let mut g = c.benchmark_group("optimizer");
    g.sample_size(10);
    g.bench_function("optimize_det_fim_8", |b| b.iter(|| optimize_det_fim(black_box(&p), 8, 1)));
    g.finish();
}

criterion_group!(benches, geometry, bounds, estimation, optimizer);
criterion_main!(benches);
