//! Benchmarks for the per-epoch hot paths: the probe pass, loss ranking,
//! the step-wise selection decision, and one SGD epoch.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use stepe::{auroc, select_kept, stream, Method, OptimizerConfig, ScheduleConfig, SelectionState};
use stepe_bench::{mlp_for, noisy_blobs};

use rand::Rng;

fn probe_pass(c: &mut Criterion) {
    let ds = noisy_blobs(2000, 32, 10);
    let model = mlp_for(&ds, 32);
    let all: Vec<usize> = (0..ds.n_train()).collect();
    c.bench_function("probe_losses_2k_mlp32", |b| {
        b.iter(|| {
            model
                .per_sample_losses(black_box(ds.x_train()), ds.noisy_labels(), &all)
                .expect("probe")
        })
    });
}

fn loss_ranking(c: &mut Criterion) {
    let losses: Vec<f64> = stream(3, "bench:rank")
        .random_iter::<f64>()
        .take(10_000)
        .collect();
    c.bench_function("select_kept_10k", |b| {
        b.iter(|| select_kept(black_box(&losses), 0.7).expect("rank"))
    });
}

fn step_e_decision(c: &mut Criterion) {
    let losses: Vec<f64> = stream(3, "bench:epoch")
        .random_iter::<f64>()
        .take(10_000)
        .collect();
    let cfg = ScheduleConfig {
        t_warm: 10,
        t_total: 60,
        rho_max: 0.45,
    };
    c.bench_function("step_e_epoch_decision_10k", |b| {
        b.iter_batched(
            || SelectionState::new(Method::StepE, losses.len(), false),
            |mut sel| {
                let mut probe = || Ok(losses.clone());
                sel.epoch(black_box(30), &cfg, &mut probe).expect("epoch")
            },
            BatchSize::SmallInput,
        )
    });
}

fn sgd_epoch(c: &mut Criterion) {
    let ds = noisy_blobs(2000, 32, 10);
    let model = mlp_for(&ds, 32);
    let kept: Vec<usize> = (0..ds.n_train()).collect();
    let opt = OptimizerConfig::default();
    c.bench_function("sgd_epoch_2k_mlp32", |b| {
        b.iter_batched(
            || model.clone(),
            |mut m| {
                m.sgd_epoch(
                    black_box(ds.x_train()),
                    ds.noisy_labels(),
                    &kept,
                    &opt,
                    0.05,
                    9,
                    None,
                )
                .expect("epoch")
            },
            BatchSize::SmallInput,
        )
    });
}

fn auroc_ranking(c: &mut Criterion) {
    let mut rng = stream(3, "bench:auroc");
    // Coarse grid scores so the midrank tie handling is exercised.
    let scores: Vec<f64> = (0..10_000)
        .map(|_| rng.random_range(0..100) as f64 * 0.01)
        .collect();
    let flags: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.4)).collect();
    c.bench_function("auroc_10k_with_ties", |b| {
        b.iter(|| auroc(black_box(&scores), &flags).expect("auroc"))
    });
}

criterion_group!(
    hotpath,
    probe_pass,
    loss_ranking,
    step_e_decision,
    sgd_epoch,
    auroc_ranking
);
criterion_main!(hotpath);
