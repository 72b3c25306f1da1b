use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use geoequiv::expr::{parse_with, Params, Symbols};
use geoequiv::fixtures;
use geoequiv::gluing;
use geoequiv::linalg;
use geoequiv::recon::{assemble_point_system, solve_connection};
use geoequiv::rigidity::{assemble_rigidity_system, fixture_weyl, rigidity_rank, rigidity_scan};
use geoequiv::tensor::{connection::levi_civita_jet, projective_weyl_at, ExprMetric, MetricModel};
use geoequiv_bench::{jets_through_origin, sample_connection};
use nalgebra::DMatrix;

fn expr(c: &mut Criterion) {
    let src = "(1 - 2*M/x1)^(-1) + x1^2*sin(x2)^2";
    let sym = Symbols::coords(4).param("M");
    c.bench_function("expr/parse", |b| b.iter(|| parse_with(black_box(src), &sym).unwrap()));
    let e = parse_with(src, &sym).unwrap();
    let mut p = Params::new();
    p.insert("M".into(), 1.0);
    let x = [0.5, 4.0, 1.2, 0.3];
    c.bench_function("expr/eval", |b| b.iter(|| e.eval(black_box(&x), &p).unwrap()));
}

fn curvature(c: &mut Criterion) {
    let m = ExprMetric::new(&fixtures::schwarzschild(), &fixtures::schwarzschild_params(1.0)).unwrap();
    let x = [0.5, 4.0, 1.2, 0.3];
    c.bench_function("tensor/metric_jet2", |b| b.iter(|| m.jet2(black_box(&x)).unwrap()));
    let jet = m.jet2(&x).unwrap();
    c.bench_function("tensor/levi_civita_jet", |b| b.iter(|| levi_civita_jet(black_box(&jet), &x).unwrap()));
    let cj = levi_civita_jet(&jet, &x).unwrap();
    c.bench_function("tensor/projective_weyl", |b| b.iter(|| projective_weyl_at(black_box(&cj))));
}

fn reconstruction(c: &mut Criterion) {
    let gamma = sample_connection(4);
    let jets = jets_through_origin(&gamma, 4, 12);
    c.bench_function("recon/point_solve_12_jets", |b| {
        b.iter(|| solve_connection(&assemble_point_system(&[0.0; 4], black_box(&jets)).unwrap()).unwrap())
    });
}

fn nullspace(c: &mut Criterion) {
    let a = DMatrix::from_fn(100, 10, |i, j| ((i * 10 + j) as f64 * 0.13).sin());
    c.bench_function("linalg/null_space_100x10", |b| b.iter(|| linalg::null_space(black_box(&a), 1e-10)));
    c.bench_function("linalg/singular_values_100x10", |b| b.iter(|| linalg::singular_values(black_box(&a))));
}

fn rigidity(c: &mut Criterion) {
    let w = fixture_weyl();
    c.bench_function("rigidity/system_rank", |b| {
        b.iter(|| rigidity_rank(&assemble_rigidity_system(black_box(&w), &[0.0; 4]), 1e-8).unwrap())
    });
    let g = fixtures::schwarzschild_field(1.0, 5).unwrap();
    let mut group = c.benchmark_group("rigidity");
    group.sample_size(10);
    group.bench_function("scan_schwarzschild_5^4", |b| b.iter(|| rigidity_scan(black_box(&g), 1e-8).unwrap()));
    group.finish();
}

fn glue(c: &mut Criterion) {
    let cat = gluing::lorentz_normal_form_catalog();
    c.bench_function("gluing/instantiate_catalog", |b| {
        b.iter(|| {
            for case in &cat {
                black_box(case.instantiate().unwrap());
            }
        })
    });
    let pair = cat[0].instantiate().unwrap();
    let mut group = c.benchmark_group("gluing");
    group.sample_size(10);
    group.bench_function("verify_pair", |b| b.iter(|| gluing::verify_pair(black_box(&pair), 5, 1e-6).unwrap()));
    group.finish();
}

criterion_group!(benches, expr, curvature, reconstruction, nullspace, rigidity, glue);
criterion_main!(benches);
