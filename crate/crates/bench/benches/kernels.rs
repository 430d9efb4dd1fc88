use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use neutral_bench::{half_sphere, matching_problem, neutral_cell, triaxial};
use neutral_core::carlson::rd;
use neutral_core::depolarization::coating_integral;
use neutral_core::field::interface_residuals;
use neutral_core::geometry::rho_from_cartesian;
use neutral_core::verifier::{rasterize, solve_cell, Grid, SolveOptions};
use neutral_core::{depolarization, effective_tensor, solve_matching, AnalyticSolution, Axis, MaterialPair};

fn geometry(c: &mut Criterion) {
    let spec = triaxial();
    c.bench_function("rho_from_cartesian", |b| {
        b.iter(|| rho_from_cartesian(black_box(&[1.3, -0.7, 2.2]), &spec))
    });
    c.bench_function("carlson_rd", |b| b.iter(|| rd(black_box(0.3), black_box(2.0), black_box(5.5))));
    c.bench_function("depolarization", |b| b.iter(|| depolarization(black_box([1.0, 10.0, 100.0]))));
    c.bench_function("coating_integral", |b| b.iter(|| coating_integral(black_box(&spec), Axis::X2)));
}

fn matching(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_matching");
    for p in [1.5, 2.0, 3.0] {
        let prob = matching_problem(p);
        group.bench_with_input(BenchmarkId::from_parameter(p), &prob, |b, prob| {
            b.iter(|| solve_matching(black_box(prob)))
        });
    }
    group.finish();
}

fn effective(c: &mut Criterion) {
    let spec = triaxial();
    let mat = MaterialPair::new(10.0, 1.0, 3.0, 1.0).unwrap();
    c.bench_function("effective_tensor", |b| b.iter(|| effective_tensor(black_box(&spec), &mat)));
    let sol = AnalyticSolution::new(&spec, &mat, Axis::X1).unwrap();
    c.bench_function("interface_residuals_100", |b| b.iter(|| interface_residuals(&sol, 100)));
}

fn verifier(c: &mut Criterion) {
    let mut group = c.benchmark_group("verifier");
    group.sample_size(10);
    let spec = half_sphere();
    let mat = MaterialPair::linear(10.0, 1.0).unwrap();
    let grid = Grid::for_spec(&spec, 32).unwrap();
    group.bench_function("rasterize_32", |b| b.iter(|| rasterize(&spec, &mat, 2.8, &grid, 4)));
    let field = neutral_cell(32);
    let opts = SolveOptions::default();
    group.bench_function("solve_cell_p2_32", |b| b.iter(|| solve_cell(&field, 1.0, Axis::X1, &opts)));
    group.finish();
}

criterion_group!(benches, geometry, matching, effective, verifier);
criterion_main!(benches);
