use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rfpc_core::evm::{evm_vs_power_sweep, generate_qam};
use rfpc_core::{run_scenario, FuzzyEngine, Scenario};

fn fuzzy_step(c: &mut Criterion) {
    let engine = FuzzyEngine::default();
    c.bench_function("fuzzy_step", |b| {
        b.iter(|| engine.fuzzy_step(black_box(0.7), black_box(-120.0)).unwrap())
    });
}

fn closed_loop(c: &mut Criterion) {
    let sc = Scenario::default();
    c.bench_function("run_scenario_fi_8s", |b| {
        b.iter(|| run_scenario(black_box(&sc)).unwrap())
    });
}

fn evm_sweep(c: &mut Criterion) {
    let mut sc = Scenario::default();
    sc.evm.symbols = 1024;
    let batch = generate_qam(sc.evm.order, sc.evm.symbols, 1).unwrap();
    c.bench_function("evm_sweep_1024_symbols", |b| {
        b.iter(|| evm_vs_power_sweep(&sc.plant, &sc.evm, black_box(&batch)).unwrap())
    });
}

criterion_group!(benches, fuzzy_step, closed_loop, evm_sweep);
criterion_main!(benches);
