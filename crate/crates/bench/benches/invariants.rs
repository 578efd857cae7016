use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use holoknot_bench::trefoil_setup;
use holoknot_core::diagram::builtin;
use holoknot_core::dilog::{li2, QDilogContext};
use holoknot_core::geometry::{multistart_segment_solve, SolveOptions};
use holoknot_core::quantize::{state_sum, state_sum_brute};
use holoknot_core::Complex64;

fn bench_dilog(c: &mut Criterion) {
    let mut group = c.benchmark_group("dilog");
    group.bench_function("li2_annulus", |b| {
        b.iter(|| li2(Complex64::new(0.8, 0.9)).unwrap())
    });
    for n in [2i64, 5, 11] {
        let ctx = QDilogContext::new(n).unwrap();
        group.bench_with_input(BenchmarkId::new("pfl_exp", n), &ctx, |b, ctx| {
            b.iter(|| ctx.pfl_exp(Complex64::new(1.37, 0.21)).unwrap())
        });
    }
    group.finish();
}

fn bench_state_sum(c: &mut Criterion) {
    let (d, lc) = trefoil_setup();
    let mut group = c.benchmark_group("state_sum");
    group.sample_size(20);
    for n in [2i64, 4, 8] {
        group.bench_with_input(BenchmarkId::new("tensor", n), &n, |b, &n| {
            b.iter(|| state_sum(&d, &lc, n).unwrap())
        });
    }
    group.bench_function("brute_n2", |b| {
        b.iter(|| state_sum_brute(&d, &lc, 2).unwrap())
    });
    group.finish();
}

fn bench_solver(c: &mut Criterion) {
    let d = builtin("figure8").unwrap();
    let mut group = c.benchmark_group("segment_solver");
    group.sample_size(10);
    group.bench_function("figure8_multistart_m1", |b| {
        b.iter(|| {
            let opts = SolveOptions {
                starts: 16,
                ..Default::default()
            };
            multistart_segment_solve(&d, Complex64::new(1.0, 0.0), &opts)
        })
    });
    group.finish();
}

criterion_group!(benches, bench_dilog, bench_state_sum, bench_solver);
criterion_main!(benches);
