use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relwave_core::coeffs::coeff_exact;
use relwave_core::dynamics::{period_grid, series};
use relwave_core::fock::{project_packet, richardson_tables};
use relwave_core::quadrature::gauss_hermite;
use relwave_core::{CoeffChannel, CoeffSource, FockConfig, GaussianPacket, OscillatorParams};

fn coefficients(c: &mut Criterion) {
    let p = OscillatorParams::natural(1e-3).unwrap();
    c.bench_function("coeff_exact/all_channels", |b| {
        b.iter(|| {
            CoeffChannel::ALL
                .iter()
                .map(|ch| coeff_exact(*ch, black_box(2.7), &p))
                .sum::<f64>()
        })
    });
}

fn moment_series(c: &mut Criterion) {
    let p = OscillatorParams::natural(1e-3).unwrap();
    let pk = GaussianPacket::new(1.0, -0.5, 0.8).unwrap();
    let mut g = c.benchmark_group("series");
    for periods in [1.0, 10.0] {
        let grid = period_grid(&p, periods, 200).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(periods), &grid, |b, grid| {
            b.iter(|| series(&pk, &p, grid, CoeffSource::Oracle).unwrap())
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("gauss_hermite");
    g.sample_size(20);
    for n in [32usize, 128, 512] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| gauss_hermite(n)));
    }
    g.finish();
}

fn fock(c: &mut Criterion) {
    let p = OscillatorParams::natural(0.0).unwrap();
    let pk = GaussianPacket::new(1.5, 0.5, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    let cfg = FockConfig { dim: 64, ..FockConfig::default() };
    let mut g = c.benchmark_group("fock");
    g.sample_size(10);
    g.bench_function("project/64", |b| b.iter(|| project_packet(&pk, &cfg, &p).unwrap()));
    let times = [0.5, 1.7, 3.1];
    g.bench_function("richardson/64", |b| {
        b.iter(|| richardson_tables(&pk, 1e-3, &times, &cfg, CoeffSource::Oracle).unwrap())
    });
    g.finish();
}

criterion_group!(benches, coefficients, moment_series, quadrature, fock);
criterion_main!(benches);
