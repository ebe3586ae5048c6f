use criterion::{criterion_group, criterion_main, Criterion};
use fasctl_bench::{reference_loop, test_matrix};
use fasctl_core::lmi::{self, SolveOptions};
use fasctl_core::matcore::{pinv, spectrum};
use fasctl_core::plants::{BALLBEAM, ELECTROMECH};
use fasctl_core::sim::simulate;
use fasctl_core::Vector;
use std::hint::black_box;

fn linear_algebra(c: &mut Criterion) {
    let wide = test_matrix(6, 11);
    let square = test_matrix(10, 10);
    c.bench_function("pinv 6x11", |b| b.iter(|| pinv(black_box(&wide)).unwrap()));
    c.bench_function("spectrum 10x10", |b| b.iter(|| spectrum(black_box(&square)).unwrap()));
}

fn lmi_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("observer lmi solve");
    for (name, mu, gamma) in [(ELECTROMECH, 40.0, 1.0), (BALLBEAM, 8.0, 5.0)] {
        let l = reference_loop(name, 0.1);
        let problem = lmi::assemble_theorem1(&l.aug, mu, gamma, &Vector::zeros(l.model.p()), 1e-6).unwrap();
        group.bench_function(name, |b| b.iter(|| lmi::solve(black_box(&problem), &SolveOptions::default()).unwrap()));
    }
    group.finish();
}

fn closed_loop(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate 1 s");
    group.sample_size(10);
    for name in [ELECTROMECH, BALLBEAM] {
        let l = reference_loop(name, 1.0);
        group.bench_function(name, |b| {
            b.iter(|| simulate(&l.model, &l.aug, &l.observer, Some(&l.controller), black_box(&l.config), true).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, linear_algebra, lmi_solve, closed_loop);
criterion_main!(benches);
