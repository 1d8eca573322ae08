use std::hint::black_box;

use ciq_core::numerics::{quantile_regression, DesignMatrix};
use ciq_core::pipeline::{run_rolling, RollingConfig};
use ciq_core::simulation::synthetic::{location_scale_market, location_scale_panel};
use ciq_core::{estimate_qfa, InitStrategy, ResidualPanel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn quantreg(c: &mut Criterion) {
    let mut group = c.benchmark_group("quantile_regression");
    for &n in &[60usize, 500, 5000] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let x = DMatrix::from_fn(n, 4, |_, j| if j == 0 { 1.0 } else { draw() });
        let y: Vec<f64> = (0..n).map(|i| x[(i, 1)] - 0.5 * x[(i, 2)] + draw()).collect();
        let design = DesignMatrix::new(x, true).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| quantile_regression(black_box(&design), black_box(&y), 0.1).unwrap())
        });
    }
    group.finish();
}

fn qfa(c: &mut Criterion) {
    let mut group = c.benchmark_group("qfa");
    group.sample_size(10);
    for &(n, t) in &[(200usize, 60usize), (200, 200)] {
        let p = location_scale_panel(n, t, 3.0, 1);
        let panel = ResidualPanel::unlabeled(p.values);
        group.bench_function(format!("{n}x{t}"), |b| {
            b.iter(|| estimate_qfa(black_box(&panel), 0.1, 1, InitStrategy::MultiStart).unwrap())
        });
    }
    group.finish();
}

fn rolling(c: &mut Criterion) {
    let mut group = c.benchmark_group("rolling");
    group.sample_size(10);
    let m = location_scale_market(200, 120, 5.0, 1).unwrap();
    let cfg = RollingConfig {
        taus: vec![0.1, 0.5, 0.9],
        estimate_betas: false,
        ..RollingConfig::default()
    };
    group.bench_function("200x120_3taus", |b| b.iter(|| run_rolling(&m.panel, &m.factors, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, quantreg, qfa, rolling);
criterion_main!(benches);
