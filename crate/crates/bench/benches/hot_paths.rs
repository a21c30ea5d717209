use std::hint::black_box;

use bayesbin::diagnostics::{ess_bulk_with, AutocovMethod};
use bayesbin::loo::psis_smooth;
use bayesbin::model::default_priors;
use bayesbin::oracle::synthetic_data;
use bayesbin::{LinkKind, ModelSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gradient(c: &mut Criterion) {
    let beta: Vec<f64> = (0..21).map(|j| 0.1 * (j as f64 - 10.0) / 10.0).collect();
    let mut group = c.benchmark_group("log_posterior_gradient");
    for link in [LinkKind::Logit, LinkKind::Probit] {
        let (design, target) = synthetic_data(link, &beta, 10_000, 1);
        let model = ModelSpec::new(link, default_priors(link), &design, &target).unwrap();
        let mut grad = vec![0.0; model.dim()];
        group.bench_function(BenchmarkId::new(link.name(), 10_000), |b| {
            b.iter(|| model.log_posterior_and_gradient(black_box(&beta), &mut grad).unwrap())
        });
    }
    group.finish();
}

fn ar1_chains(n_chains: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_chains)
        .map(|_| {
            let mut x = 0.0;
            (0..n)
                .map(|_| {
                    x = 0.7 * x + rng.random_range(-1.0..1.0);
                    x
                })
                .collect()
        })
        .collect()
}

fn ess(c: &mut Criterion) {
    let mut group = c.benchmark_group("ess_bulk");
    for n in [1_000, 10_000] {
        let chains = ar1_chains(4, n, 2);
        for (label, method) in [("direct", AutocovMethod::Direct), ("fft", AutocovMethod::Fft)] {
            if method == AutocovMethod::Direct && n > 1_000 {
                continue;
            }
            group.bench_function(BenchmarkId::new(label, n), |b| {
                b.iter(|| ess_bulk_with(black_box(&chains), method).unwrap())
            });
        }
    }
    group.finish();
}

fn psis(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw: Vec<f64> = (0..4_000).map(|_| -rng.random::<f64>().ln() * 0.8).collect();
    c.bench_function("psis_smooth_4000", |b| b.iter(|| psis_smooth(black_box(&raw))));
}

criterion_group!(benches, gradient, ess, psis);
criterion_main!(benches);
