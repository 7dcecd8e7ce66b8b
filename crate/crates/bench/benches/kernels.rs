use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use dpw_core::linalg::c;
use dpw_core::loopgroup::{iwasawa, IwasawaOptions, LoopMatrix};
use dpw_core::monodromy::{residuals, Curve, MonodromyOptions};
use dpw_core::potentials::{phi_s, Coord, GluedForm, Layout, UnknownVector};
use dpw_core::suites::unit_chain;
use dpw_core::wiener::{CircleGrid, LoopScalar};

fn wiener_product(cr: &mut Criterion) {
    let f = LoopScalar::from_coeffs((0..33).map(|k| c(1.0 / (1 + k) as f64, 0.3)).collect(), 1.2);
    cr.bench_function("wiener_mul_n16", |b| b.iter(|| black_box(&f).mul(black_box(&f)).unwrap()));
}

fn iwasawa_sphere(cr: &mut Criterion) {
    let n = 16;
    let grid = CircleGrid::for_modes(n);
    let z = c(0.4, -1.3);
    let s: Vec<_> = grid.points().into_iter().map(|l| phi_s(z, l).unwrap()).collect();
    let phi = LoopMatrix::from_samples(&s, &grid, n, 1.2).unwrap().0;
    cr.bench_function("iwasawa_n16", |b| b.iter(|| iwasawa(black_box(&phi), IwasawaOptions::default()).unwrap()));
}

fn transport_glued(cr: &mut Criterion) {
    let lay = Layout::new(&unit_chain()).unwrap();
    let x = UnknownVector::central(&lay, 6);
    let g = GluedForm::new(&lay, &x, 0.02).unwrap();
    let form = g.chart(Coord::Vertex(0), c(0.6, 0.8));
    let path = [Curve::Line { from: c(1.0, 0.0), to: c(1.5, 0.0) }, Curve::Arc { center: c(0.0, 0.0), radius: 1.5, from: 0.0, to: 3.0 }];
    cr.bench_function("transport_glued_chain", |b| b.iter(|| dpw_core::monodromy::transport(black_box(&form), c(0.6, 0.8), &path).unwrap()));
}

fn chain_residuals(cr: &mut Criterion) {
    let lay = Layout::new(&unit_chain()).unwrap();
    let x = UnknownVector::central(&lay, 6);
    let mo = MonodromyOptions::for_modes(6);
    let mut group = cr.benchmark_group("residuals");
    group.sample_size(10);
    group.bench_function("chain_t0", |b| b.iter(|| residuals(&lay, black_box(&x), 0.0, &mo).unwrap()));
    group.bench_function("chain_t0.02", |b| b.iter(|| residuals(&lay, black_box(&x), 0.02, &mo).unwrap()));
    group.finish();
}

criterion_group!(kernels, wiener_product, iwasawa_sphere, transport_glued, chain_residuals);
criterion_main!(kernels);
