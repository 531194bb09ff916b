use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use prodlab::ensembles::AtomDistribution;
use prodlab::mc::{run_experiment, ExperimentConfig, Target};
use prodlab::spectra::TestFunction;

fn config(n: usize, m: usize, target: Target, threads: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(n, m, AtomDistribution::rademacher(1.0), target);
    cfg.functions = vec![
        TestFunction::monomial(1),
        TestFunction::monomial(2),
        TestFunction::monomial(3),
    ];
    cfg.trials = 32;
    cfg.master_seed = 1;
    cfg.threads = threads;
    cfg
}

fn bench_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for (label, n, m, target) in [
        ("product", 64, 2, Target::Product),
        ("product", 128, 3, Target::Product),
        ("linearized", 64, 2, Target::Linearized),
    ] {
        let id = format!("{label}/n{n}/m{m}");
        // threads = 1 takes the sequential path even with the parallel feature
        let seq = config(n, m, target.clone(), 1);
        group.bench_with_input(BenchmarkId::new("sequential", &id), &seq, |b, cfg| {
            b.iter(|| black_box(run_experiment(cfg).unwrap()))
        });
        let par = config(n, m, target, 0);
        group.bench_with_input(BenchmarkId::new("parallel", &id), &par, |b, cfg| {
            b.iter(|| black_box(run_experiment(cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_trials);
criterion_main!(benches);
