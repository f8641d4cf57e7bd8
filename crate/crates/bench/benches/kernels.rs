use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use nicholson_bench::{classic, periodic, PERIODIC_EXPR};
use nicholson_core::criteria::sliding_window_integral;
use nicholson_core::interval_map::{DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use nicholson_core::numerics::Extremum;
use nicholson_core::{integrate, Expression, IntegrateOptions, MapSpec, ScalarField};

fn expressions(c: &mut Criterion) {
    c.bench_function("expr/parse", |b| b.iter(|| Expression::parse(black_box(PERIODIC_EXPR)).unwrap()));
    let e = Expression::parse(PERIODIC_EXPR).unwrap();
    c.bench_function("expr/eval", |b| b.iter(|| e.eval(black_box(0.37)).unwrap()));
}

fn integration(c: &mut Criterion) {
    let opts = IntegrateOptions::default();
    let model = classic();
    c.bench_function("integrate/classic_t100", |b| {
        b.iter(|| integrate(&model, Arc::new(0.5), 100.0, 0.01, &opts).unwrap())
    });
    let model = periodic();
    c.bench_function("integrate/periodic_t20", |b| {
        b.iter(|| integrate(&model, Arc::new(1.0), 20.0, 0.01, &opts).unwrap())
    });
}

fn window_integral(c: &mut Criterion) {
    let delta = ScalarField::periodic("1+0.5*cos(2*pi*t)", 1.0).unwrap();
    let sigma = ScalarField::periodic("0.1*(1+sin(2*pi*t))", 1.0).unwrap();
    c.bench_function("criteria/sliding_window_sup", |b| {
        b.iter(|| sliding_window_integral(&delta, &sigma, Extremum::Sup, 0.0).unwrap())
    });
}

fn map_sweep(c: &mut Criterion) {
    let spec = MapSpec::new(1.0, 1.0, 0.6).unwrap();
    c.bench_function("map/sweep_64", |b| {
        b.iter(|| spec.global_attractor_sweep(64, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE))
    });
}

criterion_group!(benches, expressions, integration, window_integral, map_sweep);
criterion_main!(benches);
