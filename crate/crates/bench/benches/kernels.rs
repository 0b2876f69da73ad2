use std::hint::black_box;

use cmc_forge::etau::horizontal_lift;
use cmc_forge::hyperbolic::reconstruct_curve;
use cmc_forge::mc_graph::{edge_trace, residual, solve};
use cmc_forge::periods::{build_contour, ContourSpec};
use cmc_forge::{BaseLoop, HelicoidModel, ManifoldParams, ScalarField, SolveOptions, TwistProfile};
use cmc_forge_bench::{bump, saddle, unit_square};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn graph_solver(c: &mut Criterion) {
    let p = ManifoldParams::nil_symmetric();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for h in [0.1, 0.05, 0.025] {
        let dom = unit_square(h, bump);
        g.bench_with_input(BenchmarkId::new("bump", h), &dom, |b, dom| {
            b.iter(|| solve(dom.clone(), p, 0.0, &SolveOptions::default()).unwrap())
        });
    }
    g.finish();

    let dom = unit_square(0.025, saddle);
    let field = ScalarField::from_fn(dom, p, 0.0, saddle);
    c.bench_function("residual/h=0.025", |b| b.iter(|| residual(black_box(&field))));
    c.bench_function("edge_trace/h=0.025", |b| {
        b.iter(|| edge_trace(black_box(&field), 0).unwrap())
    });
}

fn geometry(c: &mut Criterion) {
    let p = ManifoldParams::nil_symmetric();
    let lp = BaseLoop::circle([0.1, 0.2], 0.5, 4000, true).unwrap();
    c.bench_function("horizontal_lift/4000", |b| {
        b.iter(|| horizontal_lift(&p, black_box(&lp), 0.0).unwrap())
    });

    c.bench_function("helicoid_model/alpha=1", |b| {
        b.iter(|| HelicoidModel::with_alpha(black_box(1.0)).unwrap())
    });

    let profile = TwistProfile::from_fn(
        0.3,
        64,
        |t| 1.2 * t + 0.1 * (5.0 * t).sin(),
        |t| 1.2 + 0.5 * (5.0 * t).cos(),
    )
    .unwrap();
    c.bench_function("reconstruct_curve", |b| {
        b.iter(|| reconstruct_curve(black_box(&profile)))
    });

    let spec = ContourSpec::new(1.0, 0.3, std::f64::consts::FRAC_PI_3, 4.0).unwrap();
    c.bench_function("build_contour", |b| b.iter(|| build_contour(black_box(&spec)).unwrap()));
}

criterion_group!(benches, graph_solver, geometry);
criterion_main!(benches);
