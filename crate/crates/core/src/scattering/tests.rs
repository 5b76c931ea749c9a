use super::*;

#[test]
fn zero_potential_is_trivial() {
    let v = PotentialSpec::zero(3);
    let opts = ScatteringOptions { cells: 16, ..ScatteringOptions::for_dim(3) };
    let s = solve_scattering_with(&v, 1.0, 1e-8, &opts).unwrap();
    assert_eq!(s.b, 0.0);
    assert!(s.omega.iter().all(|w| *w == 0.0));
    assert_eq!(s.decay_constants.c_omega, 0.0);
    assert_eq!(born_series(&v, 1).unwrap(), 0.0);
    assert_eq!(born_series(&v, 2).unwrap(), 0.0);
}

fn well_exact(v0: f64, r: f64) -> f64 {
    let k = (v0 / 2.0f64).sqrt();
    8.0 * std::f64::consts::PI * (r - (k * r).tanh() / k)
}

fn opts3(cells: usize) -> ScatteringOptions {
    ScatteringOptions { cells, ..ScatteringOptions::for_dim(3) }
}

#[test]
fn square_well_matches_radial_oracle() {
    let v = PotentialSpec::square_well(3, 50.0, 1.0).unwrap();
    let s = solve_scattering_with(&v, 4.0, 1e-8, &opts3(64)).unwrap();
    let exact = well_exact(50.0, 1.0);
    assert!((s.b - exact).abs() / exact < 5e-3, "{} vs {exact}", s.b);
    assert!(s.residual <= 1e-8);
    assert!(s.f_min > 0.0);
    assert!(s.b < v.integral().unwrap());
    let rep = check_pointwise_bounds(&s);
    assert!(rep.pass);
    assert!(rep.omega_min >= 0.0);
    let p = rep.decay_exponent.unwrap();
    assert!((p - 1.0).abs() < 0.1, "decay exponent {p}");
    // Energy consistency with the discrete functional.
    assert!((s.b_grid - s.functional).abs() <= 10.0 * 1e-8 * s.b_grid);
}

#[test]
fn radial_solution_reports() {
    let v = PotentialSpec::square_well(3, 50.0, 1.0).unwrap();
    let s = solve_scattering_radial(&v, 6.0, 1e-12).unwrap();
    assert!((s.b - well_exact(50.0, 1.0)).abs() < 1e-8);
    let rep = check_pointwise_bounds(&s);
    assert!(rep.pass);
    assert!((rep.decay_exponent.unwrap() - 1.0).abs() < 1e-6);
    let z = solve_scattering_radial(&PotentialSpec::zero(3), 2.0, 1e-10).unwrap();
    assert_eq!(z.b, 0.0);
    assert!(solve_scattering_radial(&v, 1.0, 1e-10).is_err());
}

#[test]
fn hard_sphere_limit_from_below() {
    let target = 8.0 * std::f64::consts::PI;
    let mut last = 0.0;
    for v0 in [1e2, 1e3, 1e4] {
        let v = PotentialSpec::square_well(3, v0, 1.0).unwrap();
        let b = solve_scattering_radial(&v, 4.0, 1e-12).unwrap().b;
        assert!(b > last && b < target);
        last = b;
    }
    assert!((target - last) / target < 0.02);
}

#[test]
fn rejects_bad_inputs() {
    assert!(PotentialSpec::square_well(3, -1.0, 1.0).is_err());
    let v = PotentialSpec::square_well(3, 1.0, 1.0).unwrap();
    assert!(matches!(solve_scattering_with(&v, 3.9, 1e-8, &opts3(16)), Err(Error::Precondition(_))));
    assert!(solve_scattering_with(&v, 4.0, 0.0, &opts3(16)).is_err());
    assert!(solve_scattering_with(&v, 4.0, 1e-8, &opts3(15)).is_err());
    assert!(born_series(&v, 3).is_err());
    assert!(born_series(&v, 0).is_err());
}

#[test]
fn cg_cap_reports_divergence() {
    let v = PotentialSpec::square_well(3, 50.0, 1.0).unwrap();
    let opts = ScatteringOptions { iterations_per_cell: 0, ..opts3(16) };
    match solve_scattering_with(&v, 4.0, 1e-8, &opts) {
        Err(Error::NonConvergence { residual, .. }) => assert!(residual > 0.0),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn minimizer_is_stationary() {
    use rand::{Rng, SeedableRng};
    let v = PotentialSpec::square_well(3, 20.0, 1.0).unwrap();
    let prob = ScatteringProblem::new(&v, Metric::Standard, 24, 4.0, 4).unwrap();
    let (omega, _) = prob.solve(1e-10, 2000).unwrap();
    let op = prob.operator().unwrap();
    let f0 = prob.functional(&op, &omega);
    assert!((f0 - prob.energy(&omega)).abs() < 1e-9 * f0);
    let coords = prob.grid.node_coords();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let eps = 1e-3;
    for _ in 0..100 {
        // Random bump supported on a small box of cells.
        let c: Vec<i32> = (0..3).map(|_| rng.gen_range(4..20)).collect();
        let mut w = omega.clone();
        for (i, x) in coords.iter().enumerate() {
            if (0..3).all(|k| (x[k] - c[k]).abs() <= 2) {
                w[i] += eps * rng.gen_range(-1.0..1.0);
            }
        }
        let df = prob.functional(&op, &w) - f0;
        assert!(df > -1e-12 * f0, "energy dropped by {df:e}");
    }
}

#[test]
fn discrete_scaling_identity() {
    // b(s^2 v(s x)) = s^(2-d) b(v) on proportionally rescaled grids.
    let v = PotentialSpec::square_well(3, 30.0, 1.0).unwrap();
    let b1 = solve_scattering_with(&v, 4.0, 1e-10, &opts3(24)).unwrap().b;
    for s in [2.0, 0.5] {
        let vs = v.scaled(s * s, s).unwrap();
        let bs = solve_scattering_with(&vs, 4.0 / s, 1e-10, &opts3(24)).unwrap().b;
        assert!((bs * s / b1 - 1.0).abs() < 1e-6, "s = {s}");
    }
}

#[test]
fn born_terms() {
    // <v, (-Delta)^-1 v> = 8 pi V0^2 R^5 / 15 for a ball in R^3.
    let (v0, r) = (50.0, 1.0);
    let v = PotentialSpec::square_well(3, v0, r).unwrap();
    let g = green_energy(&v, Metric::Standard).unwrap();
    let exact = 8.0 * std::f64::consts::PI * v0 * v0 * r.powi(5) / 15.0;
    assert!((g - exact).abs() < 1e-9 * exact);
    let grid = green_energy_grid(&v, Metric::Standard, 24).unwrap();
    assert!((grid - exact).abs() / exact < 3e-2, "{grid} vs {exact}");
    let b = solve_scattering_radial(&v, 4.0, 1e-12).unwrap().b;
    let b1 = born_series(&v, 1).unwrap();
    let b2 = born_series(&v, 2).unwrap();
    assert!(b2 <= b && b <= b1);
    assert!((b1 - v0 * 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-9);
}

#[test]
fn six_dimensional_green_reductions() {
    // Ball in R^6: <v, (-Delta)^-1 v> = pi^3 V0^2 R^8 / 96.
    let ball = PotentialSpec::square_well(6, 2.0, 1.5).unwrap();
    let exact = std::f64::consts::PI.powi(3) * 4.0 * 1.5f64.powi(8) / 96.0;
    assert!((green_energy(&ball, Metric::Standard).unwrap() - exact).abs() < 1e-9 * exact);
    // The invariant Gaussian: the 1D reductions against the grid double sum.
    // The coarse double sum is biased low by the same factor for both metrics.
    let v = PotentialSpec::gaussian6d(1.0, 1.0, 1.0).unwrap();
    let s1 = green_energy(&v, Metric::Standard).unwrap();
    let m1 = green_energy(&v, Metric::Modified).unwrap();
    let s6 = green_energy_grid(&v, Metric::Standard, 6).unwrap();
    let m6 = green_energy_grid(&v, Metric::Modified, 6).unwrap();
    assert!(s6 < s1 && (s6 - s1).abs() / s1 < 0.25, "{s6} vs {s1}");
    assert!(((m6 / s6) / (m1 / s1) - 1.0).abs() < 5e-2, "{} vs {}", m6 / s6, m1 / s1);
    // A radial 6D well: the modified energy carries the mean of |M theta|^-2.
    let w = PotentialSpec::square_well(6, 1.0, 1.0).unwrap();
    let s = green_energy(&w, Metric::Standard).unwrap();
    let m = green_energy(&w, Metric::Modified).unwrap();
    assert!((m / s - angular_average(false)).abs() < 1e-12);
    // Means of |B theta|^-2 lie between the extreme singular values.
    let a = angular_average(true);
    assert!(a > 0.5 && a < 1.5);
}

#[test]
fn scale_potential_conventions() {
    let v = PotentialSpec::gaussian6d(2.0, 1.0, 1.0).unwrap();
    let same = scale_potential(&v, 1, 0.5).unwrap();
    assert_eq!(same.support_radius, v.support_radius);
    let v4 = scale_potential(&v, 4, 0.5).unwrap();
    assert!((v4.support_radius - v.support_radius / 2.0).abs() < 1e-14);
    assert!((v4.sup_norm - 4.0 * v.sup_norm).abs() < 1e-12);
    assert!((v4.integral().unwrap() - v.integral().unwrap() / 16.0).abs() < 1e-12);
    assert!(scale_potential(&v, 2, 0.6).is_err());
    assert!(scale_potential(&v, 0, 0.5).is_err());

    let w = PotentialSpec::square_well(3, 50.0, 1.0).unwrap();
    let bw = solve_scattering_radial(&w, 4.0, 1e-12).unwrap().b;
    for n in [2u64, 4, 8] {
        let wn = scale_potential(&w, n, 1.0).unwrap();
        assert!((wn.support_radius - 1.0 / n as f64).abs() < 1e-15);
        let b = solve_scattering_radial(&wn, 4.0 / n as f64, 1e-12).unwrap().b;
        assert!((b * n as f64 / bw - 1.0).abs() < 5e-3);
    }
}

#[test]
fn modified_energy_requires_symmetry() {
    let v = PotentialSpec::new(crate::potential::Descriptor::BlockQuadratic { xx: 1.0, yy: 2.0, xy: 0.0, radius: 1.0 })
        .unwrap();
    match scattering_energy_modified(&v, 4.0, 1e-8) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("S:")),
        other => panic!("{other:?}"),
    }
    let z = PotentialSpec::zero(6);
    assert_eq!(scattering_energy_modified(&z, 1.0, 1e-8).unwrap(), (0.0, 0.0));
}

#[test]
fn six_dimensional_paths_at_low_resolution() {
    let v = PotentialSpec::gaussian6d(5.0, 1.0, 1.0).unwrap();
    let oracle = modified_energy_radial(&v, 1e-12).unwrap();
    let int = v.integral().unwrap();
    assert!(oracle > 0.0 && oracle < int);
    let opts = ScatteringOptions { cells: 10, ..ScatteringOptions::for_dim(6) };
    let r = scattering_energy_modified_with(&v, 4.0 * v.support_radius, 1e-8, &opts).unwrap();
    assert!((r.b_m - oracle).abs() / oracle < 0.1, "{} vs {oracle}", r.b_m);
    assert!((r.cross_check - oracle).abs() / oracle < 0.1, "{} vs {oracle}", r.cross_check);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn monotone_and_below_first_born(v1 in 0.1f64..60.0, extra in 0.0f64..40.0, r in 0.6f64..1.2) {
            let opts = ScatteringOptions { cells: 16, extrapolate: false, ..ScatteringOptions::for_dim(3) };
            let a = PotentialSpec::square_well(3, v1, r).unwrap();
            let b = PotentialSpec::square_well(3, v1 + extra, r).unwrap();
            let sa = solve_scattering_with(&a, 4.0 * r, 1e-10, &opts).unwrap();
            let sb = solve_scattering_with(&b, 4.0 * r, 1e-10, &opts).unwrap();
            prop_assert!(sa.b <= sb.b * (1.0 + 1e-12));
            let prob = ScatteringProblem::new(&a, Metric::Standard, 16, 4.0 * r, 6).unwrap();
            let discrete_int: f64 = prob.potential.iter().sum::<f64>() * prob.grid.h.powi(3);
            prop_assert!(sa.b < discrete_int);
            prop_assert!(sa.f_min > 0.0);
        }
    }
}
