use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcsim_core::modulators::duty;
use mcsim_core::switchcore::{sequence_with, Sequencing};
use mcsim_core::waveforms::{spectrum, TimeGrid};
use mcsim_core::{MethodId, ModulationTarget};

fn target(q: f64) -> ModulationTarget {
    ModulationTarget::new(q, TAU * 30.0, 0.0, 359.26, TAU * 60.0, 0.0, 1.0 / 16_000.0).unwrap()
}

fn duty_matrices(c: &mut Criterion) {
    let mut g = c.benchmark_group("duty");
    let t = target(0.45);
    for m in MethodId::ALL {
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            let mut time = 0.0;
            b.iter(|| {
                time += 1.3e-4;
                black_box(duty(m, &t, black_box(time)).unwrap())
            })
        });
    }
    g.finish();
}

fn sequencing(c: &mut Criterion) {
    let d = duty(MethodId::VenturiniOptimum, &target(0.8), 1.7e-3).unwrap();
    let mut g = c.benchmark_group("sequence");
    g.bench_function("single", |b| {
        b.iter(|| sequence_with(black_box(&d), Sequencing::Single).unwrap())
    });
    g.bench_function("symmetric", |b| {
        b.iter(|| sequence_with(black_box(&d), Sequencing::Symmetric).unwrap())
    });
    g.finish();
}

fn harmonic_spectrum(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0 / 16_000.0, 16_000).unwrap();
    let x: Vec<f64> = grid
        .times()
        .map(|t| (TAU * 30.0 * t).sin() + 0.1 * (TAU * 150.0 * t).sin())
        .collect();
    c.bench_function("spectrum_1s_16k", |b| {
        b.iter(|| spectrum(black_box(&x), 30.0, &grid, 50).unwrap())
    });
}

criterion_group!(benches, duty_matrices, sequencing, harmonic_spectrum);
criterion_main!(benches);
