use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vsvm_core::datasets::{gaussian_mixture, xor_dataset, MixtureConfig};
use vsvm_core::feasibility::brute_force_oracle_with;
use vsvm_core::kernels::{gram_entries, gram_with, GramMatrix, KernelSpec};
use vsvm_core::numerics::Matrix;
use vsvm_core::qp::{assemble, VMatrix};
use vsvm_core::solver::oracle::verify_against_oracle_with;
use vsvm_core::solver::{solve, SolverConfig};
use vsvm_core::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn gram_entries_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram_entries");
    for n in [100, 400] {
        let cfg = MixtureConfig {
            n1: n / 2,
            n2: n / 2,
            ..Default::default()
        };
        let data = gaussian_mixture(&cfg).unwrap();
        let spec = KernelSpec::rbf(1.0).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &data, |b, d| {
                b.iter(|| gram_entries(black_box(d), spec, exec))
            });
        }
    }
    group.finish();
}

fn gram_with_spectrum(c: &mut Criterion) {
    let data = gaussian_mixture(&MixtureConfig::default()).unwrap();
    let spec = KernelSpec::rbf(1.0).unwrap();
    let mut group = c.benchmark_group("gram_with_spectrum");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| gram_with(black_box(&data), spec, exec).unwrap())
        });
    }
    group.finish();
}

fn feasibility_grid(c: &mut Criterion) {
    let k = Matrix::from_rows(&[
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 2.0, 1.0, 1.0],
        [0.0, 1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
    ])
    .unwrap();
    let g = GramMatrix::from_matrix(k).unwrap();
    let mut group = c.benchmark_group("feasibility_grid");
    // b = 2.5 is infeasible, so the whole grid is scanned.
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| brute_force_oracle_with(&g, black_box(2.5), 801, exec).unwrap())
        });
    }
    group.finish();
}

fn qp_grid(c: &mut Criterion) {
    let d = xor_dataset();
    let g = Arc::new(gram_with(&d, KernelSpec::rbf(1.0).unwrap(), Execution::Sequential).unwrap());
    let prob = assemble(&g, &VMatrix::identity(4), d.labels(), 1.0).unwrap();
    let sol = solve(&prob, &SolverConfig::default()).unwrap();
    let mut group = c.benchmark_group("qp_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| verify_against_oracle_with(&prob, &sol, black_box(60), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    gram_entries_bench,
    gram_with_spectrum,
    feasibility_grid,
    qp_grid
);
criterion_main!(benches);
