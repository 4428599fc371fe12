use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rankgroth::constants::{grothendieck_table, SeriesConfig};
use rankgroth::graph::{lattice_instance, Couplings};
use rankgroth::rounding::{estimate_rounding, identity_check};
use rankgroth::sdp::{local_search_rank_r, solve_sdp_infinity};
use rankgroth::Backend;

const BACKENDS: [(&str, Backend); 2] = [("sequential", Backend::Sequential), ("parallel", Backend::Parallel)];

fn rounding(c: &mut Criterion) {
    let inst = lattice_instance(&[4, 4, 4], Couplings::Random, 1).unwrap();
    let sdp = solve_sdp_infinity(&inst, 1e-9, 100_000, 1).unwrap();
    let mut group = c.benchmark_group("estimate_rounding");
    group.sample_size(10);
    for (name, backend) in BACKENDS {
        group.bench_with_input(BenchmarkId::new(name, 2000), &backend, |b, &backend| {
            b.iter(|| {
                estimate_rounding(&inst, &sdp.assignment, 3, 2000, 0, 0.78, sdp.value, backend)
                    .map(|rep| black_box(rep.mean_value))
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn identity(c: &mut Criterion) {
    let cfg = SeriesConfig {
        terms: 64,
        precision_bits: 128,
    };
    let mut group = c.benchmark_group("identity_check");
    group.sample_size(10);
    for (name, backend) in BACKENDS {
        group.bench_with_input(BenchmarkId::new(name, 200_000), &backend, |b, &backend| {
            b.iter(|| black_box(identity_check(3, 0.5, 200_000, 0, cfg, backend).unwrap().mc_mean))
        });
    }
    group.finish();
}

fn local_search(c: &mut Criterion) {
    let inst = lattice_instance(&[3, 3, 3], Couplings::Random, 2).unwrap();
    let mut group = c.benchmark_group("local_search_rank_r");
    group.sample_size(10);
    for (name, backend) in BACKENDS {
        group.bench_with_input(BenchmarkId::new(name, 3), &backend, |b, &backend| {
            b.iter(|| black_box(local_search_rank_r(&inst, 3, 16, 0, backend).unwrap().1))
        });
    }
    group.finish();
}

fn table(c: &mut Criterion) {
    let cfg = SeriesConfig {
        terms: 256,
        precision_bits: 128,
    };
    let mut group = c.benchmark_group("grothendieck_table");
    group.sample_size(10);
    for (name, backend) in BACKENDS {
        group.bench_with_input(BenchmarkId::new(name, 4), &backend, |b, &backend| {
            b.iter(|| black_box(grothendieck_table(4, &[2.0, 3.0], cfg, 1e-12, backend).unwrap().len()))
        });
    }
    group.finish();
}

criterion_group!(benches, rounding, identity, local_search, table);
criterion_main!(benches);
