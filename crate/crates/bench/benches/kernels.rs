use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;

use gpscatter::dyson::{dyson_gap, DysonGrid, DysonParams};
use gpscatter::fewbody::ground_state;
use gpscatter::gp::{gp_energy, gp_gradient, minimize_gp};
use gpscatter::linalg::random_vector;
use gpscatter::scattering::{modified_energy_radial, solve_scattering_radial, Metric};
use gpscatter::PotentialSpec;
use gpscatter_bench::*;

fn scattering(c: &mut Criterion) {
    let p = well_problem(64);
    let op = p.operator().unwrap();
    let x = vec![0.5; p.grid.len()];
    let mut y = vec![0.0; p.grid.len()];
    c.bench_function("scattering/apply_3d_64", |b| b.iter(|| op.apply(black_box(&x), &mut y)));

    let p6 = modified_problem(10);
    let op6 = p6.operator().unwrap();
    let x6 = vec![0.5; p6.grid.len()];
    let mut y6 = vec![0.0; p6.grid.len()];
    c.bench_function("scattering/apply_modified_6d_10", |b| b.iter(|| op6.apply(black_box(&x6), &mut y6)));

    let mut g = c.benchmark_group("scattering/solve");
    g.sample_size(10);
    g.bench_function("grid_3d_32", |b| b.iter(|| well_problem(32).solve(1e-8, 2000).unwrap()));
    g.bench_function("radial_oracle", |b| b.iter(|| solve_scattering_radial(&square_well(), 6.0, 1e-12).unwrap().b));
    g.bench_function("radial_modified_6d", |b| {
        b.iter(|| modified_energy_radial(&default_interaction(), 1e-12).unwrap())
    });
    g.finish();
}

fn dyson(c: &mut Criterion) {
    let u = PotentialSpec::annulus(3, 4.0, 8.0).unwrap();
    let p = DysonParams { r0: 1.0, r1: 4.0, r2: 8.0 };
    let mut g = c.benchmark_group("dyson");
    g.sample_size(10);
    g.bench_function("radial_gap_800", |b| {
        b.iter(|| dyson_gap(&square_well(), &u, p, DysonGrid::Radial { cells: 800 }, Metric::Standard).unwrap().c_star)
    });
    g.finish();
}

fn gross_pitaevskii(c: &mut Criterion) {
    let op = harmonic(32);
    let w = op.cell_volume();
    let mut u: Vec<Complex64> = random_vector(op.sites(), 1);
    let s = 1.0 / (w * u.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    u.iter_mut().for_each(|z| *z *= s);
    c.bench_function("gp/energy_32", |b| b.iter(|| gp_energy(black_box(&u), &op, 1.5).unwrap()));
    c.bench_function("gp/gradient_32", |b| b.iter(|| gp_gradient(black_box(&u), &op, 1.5).unwrap()));
    let small = harmonic(16);
    let mut g = c.benchmark_group("gp/minimize");
    g.sample_size(10);
    g.bench_function("harmonic_16", |b| b.iter(|| minimize_gp(&small, 1.5, 1e-9, 1).unwrap().e_gp));
    g.finish();
}

fn few_body_lattice(c: &mut Criterion) {
    let sys = few_body(4, 3);
    let x: Vec<f64> = random_vector(sys.dim(), 3);
    let mut y = vec![0.0; sys.dim()];
    c.bench_function("fewbody/matvec_l4_n3", |b| b.iter(|| sys.apply(black_box(&x), &mut y)));
    let mut g = c.benchmark_group("fewbody/ground_state");
    g.sample_size(10);
    g.bench_function("l4_n3", |b| b.iter_batched(|| few_body(4, 3), |s| ground_state(&s, 1e-10).unwrap().energy, BatchSize::LargeInput));
    g.finish();
}

criterion_group!(benches, scattering, dyson, gross_pitaevskii, few_body_lattice);
criterion_main!(benches);
