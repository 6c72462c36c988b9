//! Parallel vs sequential batch evaluation.
//!
//! On a single-core machine the two paths should be within noise of each
//! other; the gap grows with the number of rayon worker threads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polyent::harness::{self, BatchSpec};
use polyent::qstate::{self, Bipartition, DimVector};
use polyent::{par, rng, roofopt, InequalityId, OptimizerConfig};

fn dims(v: &[usize]) -> DimVector {
    DimVector::new(v.to_vec()).unwrap()
}

fn bench_batches(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    for (id, d, n) in [
        (InequalityId::Ckw, vec![2, 2, 2], 256),
        (InequalityId::Poly, vec![2, 2, 2], 16),
        (InequalityId::UeMutual, vec![2, 2], 16),
    ] {
        let spec = BatchSpec::new(id, dims(&d), n, 1);
        group.bench_with_input(BenchmarkId::new("parallel", id), &spec, |b, s| {
            b.iter(|| harness::batch_run(black_box(s)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", id), &spec, |b, s| {
            b.iter(|| harness::batch_run_sequential(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn bench_eof_sweep(c: &mut Criterion) {
    let states: Vec<_> = (0..8)
        .map(|k| qstate::random_mixed(&dims(&[2, 2]), 1 + k % 4, rng::mix(5, k as u64)).unwrap())
        .collect();
    let cut = Bipartition::new(&[0], 2).unwrap();
    let cfg = OptimizerConfig { restarts: 2, ..OptimizerConfig::default() };
    let eof = |k: usize| roofopt::minimize_roof(&states[k], &cut, &cfg).unwrap().value;

    let mut group = c.benchmark_group("eof_sweep");
    group.sample_size(10);
    group.bench_function("map_indices", |b| b.iter(|| par::map_indices(states.len(), eof)));
    group.bench_function("map_indices_seq", |b| b.iter(|| par::map_indices_seq(states.len(), eof)));
    group.finish();
}

criterion_group!(benches, bench_batches, bench_eof_sweep);
criterion_main!(benches);
