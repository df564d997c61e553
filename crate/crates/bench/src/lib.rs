//! Criterion benchmarks for the hot paths: kernel transforms, bracket
//! contractions, the Neumann series and sublevel moments.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use hypolab::grid::GridSpec;
use hypolab::kernels::fundamental_solution_const;
use hypolab::levi::{bracket, desk_example, desk_grid, fundamental_solution_variable, neumann_u, LeviConfig, TwoPointKernel};
use hypolab::spectral::{geometric_grid, sublevel_moments, MomentOptions};
use hypolab::{parse, MultiIndex};
use num_complex::Complex64;

fn smooth_kernel(spec: &GridSpec, scale: f64) -> TwoPointKernel {
    TwoPointKernel::from_fn(spec, |x, z| {
        let d = x[0] - z[0];
        Complex64::new(scale * (-d * d).exp() * (1.0 + 0.1 * x[0]).cos(), 0.0)
    })
}

pub fn kernels(c: &mut Criterion) {
    let m = parse("xi1^2 + xi2^2").unwrap();
    let mut g = c.benchmark_group("fundamental_solution_const");
    for n in [32usize, 64, 128] {
        let spec = GridSpec::good_only(vec![n, n], vec![8.0, 8.0]).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &spec, |b, spec| {
            b.iter(|| fundamental_solution_const(&m, black_box(-4.0), spec).unwrap())
        });
    }
    g.finish();
}

pub fn levi(c: &mut Criterion) {
    let mut g = c.benchmark_group("bracket");
    for n in [32usize, 64, 128] {
        let spec = GridSpec::good_only(vec![n], vec![4.0]).unwrap();
        let f = smooth_kernel(&spec, 0.1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| b.iter(|| bracket(f, f).unwrap()));
    }
    g.finish();

    let spec = GridSpec::good_only(vec![64], vec![4.0]).unwrap();
    let alpha = smooth_kernel(&spec, 0.1);
    c.bench_function("neumann_u/64", |b| b.iter(|| neumann_u(&alpha, 1e-10, 100).unwrap()));

    let op = desk_example();
    let spec = desk_grid();
    let cfg = LeviConfig::default();
    let mut g = c.benchmark_group("desk");
    g.sample_size(10);
    g.bench_function("fundamental_solution_variable", |b| {
        b.iter(|| fundamental_solution_variable(&op, -64.0, &[0.5, 0.25], &spec, &cfg).unwrap())
    });
    g.finish();
}

pub fn spectral(c: &mut Criterion) {
    let lam = geometric_grid(1.0, 1e3, 10);
    let opts = MomentOptions::default();
    for (name, text) in [("disk", "xi1^2 + xi2^2"), ("quasi_elliptic", "xi1^4 + xi2^2")] {
        let p = parse(text).unwrap();
        c.bench_function(&format!("sublevel_moments/{name}"), |b| {
            b.iter(|| sublevel_moments(&p, &lam, &[MultiIndex::zeros(2)], &opts).unwrap())
        });
    }
}
