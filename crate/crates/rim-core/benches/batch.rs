//! Parallel vs sequential batch throughput on the reference machine. With
//! default features the batch entry points fan out over rayon; build with
//! `--no-default-features` to measure the sequential fallback on both sides.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use rim_core::batch::{
    diagnose_batch, diagnose_batch_sequential, simulate_batch, simulate_batch_sequential,
};
use rim_core::diagnosis::Algorithm;
use rim_core::reference;
use rim_core::sim::{FaultKind, FaultSpec};

fn fault_mix(size: usize) -> Vec<(FaultSpec, u64)> {
    (0..size)
        .map(|i| (FaultSpec::new(FaultKind::ALL[i % FaultKind::ALL.len()]), i as u64))
        .collect()
}

fn bench_simulate(c: &mut Criterion) {
    let cfg = reference::machine_config();
    let mut group = c.benchmark_group("simulate_batch");
    for size in [64usize, 512] {
        let runs = fault_mix(size);
        group.throughput(Throughput::Elements(size as u64));
        group.bench_with_input(BenchmarkId::new("parallel", size), &runs, |b, runs| {
            b.iter(|| simulate_batch(&cfg, runs).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", size), &runs, |b, runs| {
            b.iter(|| simulate_batch_sequential(&cfg, runs).unwrap())
        });
    }
    group.finish();
}

fn bench_diagnose(c: &mut Criterion) {
    let definition = reference::machine_definition();
    let cfg = reference::machine_config();
    let trigger = definition.process.eject_not_ok_station().unwrap();
    let mut group = c.benchmark_group("diagnose_batch");
    for size in [64usize, 512] {
        let traces = simulate_batch(&cfg, &fault_mix(size)).unwrap();
        group.throughput(Throughput::Elements(size as u64));
        group.bench_with_input(BenchmarkId::new("parallel", size), &traces, |b, traces| {
            b.iter(|| diagnose_batch(&definition, traces, trigger, Algorithm::MultiStep).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", size), &traces, |b, traces| {
            b.iter(|| {
                diagnose_batch_sequential(&definition, traces, trigger, Algorithm::MultiStep)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_diagnose);
criterion_main!(benches);
