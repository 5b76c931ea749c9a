use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{lanczos_lowest, norm2, LanczosOptions};
use crate::potential::PotentialSpec;

fn random_normalized(op: &OneBody, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<Complex64> = op
        .v_ext
        .iter()
        .map(|v| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (-(v - 1.0) / 6.0).exp())
        .collect();
    let s = 1.0 / (op.cell_volume() * norm2(&u)).sqrt();
    u.iter_mut().for_each(|z| *z *= s);
    u
}

fn tangent(u: &[Complex64], d: &mut [Complex64], w: f64) {
    let r: f64 = w * u.iter().zip(d.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
    d.iter_mut().zip(u).for_each(|(x, y)| *x -= y * r);
}

fn retract(u: &[Complex64], d: &[Complex64], t: f64, w: f64) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = u.iter().zip(d).map(|(a, b)| a + b * t).collect();
    let s = 1.0 / (w * norm2(&v)).sqrt();
    v.iter_mut().for_each(|z| *z *= s);
    v
}

#[test]
fn harmonic_ground_energy_at_zero_coupling() {
    let op = OneBodySpec::harmonic(32).build().unwrap();
    let st = minimize_gp(&op, 0.0, 1e-10, 1).unwrap();
    assert!((st.e_gp - 4.0).abs() < 1e-2, "{}", st.e_gp);
    assert!(st.el_residual <= 1e-8);
    // Agrees with the lowest eigenvalue of the discrete h.
    let res = lanczos_lowest(
        op.sites(),
        |x: &[f64], y: &mut [f64]| op.apply(x, y),
        None,
        &LanczosOptions { tol: 1e-13, abs_tol: 1e-12, ..Default::default() },
    )
    .unwrap();
    assert!((st.e_gp - res.values[0]).abs() < 1e-12 * res.values[0]);
}

#[test]
fn energy_decreases_along_iterates() {
    let op = OneBodySpec::harmonic(24).build().unwrap();
    let st = minimize_gp(&op, 2.0, 1e-9, 3).unwrap();
    for w in st.energy_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
    let e = gp_energy(&st.u, &op, 2.0).unwrap();
    assert!((e - st.e_gp).abs() <= 1e-12 * e);
    // eps0 - e_gp = 2 coupling int |u|^6.
    let six = sextic_integral(&st.u, &op);
    assert!((st.eps0 - st.e_gp - 4.0 * six).abs() < 1e-10);
}

#[test]
fn gradient_matches_central_differences() {
    let spec = OneBodySpec {
        trap: Trap::Harmonic { omega: [1.0, 0.9, 1.1] },
        field: VectorPotential::Uniform { b: [0.2, 0.4, -0.3] },
        points: 12,
        half_width: Some(4.0),
        stencil: Some(Stencil::Fourth),
    };
    let op = spec.build().unwrap();
    let w = op.cell_volume();
    let g = 1.7;
    let u = random_normalized(&op, 5);
    let grad = gp_gradient(&u, &op, g).unwrap();
    for k in 0..20 {
        let mut d = random_normalized(&op, 100 + k);
        tangent(&u, &mut d, w);
        let analytic: f64 = w * grad.iter().zip(&d).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        let eps = 1e-5;
        let ep = gp_energy(&retract(&u, &d, eps, w), &op, g).unwrap();
        let em = gp_energy(&retract(&u, &d, -eps, w), &op, g).unwrap();
        let fd = (ep - em) / (2.0 * eps);
        assert!((fd - analytic).abs() <= 1e-6 * analytic.abs(), "{k}: {fd} vs {analytic}");
    }
}

#[test]
fn global_phase_and_gauge_invariance() {
    let field = VectorPotential::Uniform { b: [0.0, 0.0, 0.7] };
    let trap = Trap::Harmonic { omega: [1.0; 3] };
    let chi = |x: [f64; 3]| 0.4 * (0.7 * x[0]).sin() * (0.5 * x[1]).cos() + 0.1 * x[0] * x[2];
    let grad_chi = |x: [f64; 3]| {
        [
            0.28 * (0.7 * x[0]).cos() * (0.5 * x[1]).cos() + 0.1 * x[2],
            -0.2 * (0.7 * x[0]).sin() * (0.5 * x[1]).sin(),
            0.1 * x[0],
        ]
    };
    let (n, half) = (14, 4.5);
    let op = {
        let (t, f) = (trap.clone(), field.clone());
        OneBody::from_samplers(n, half, Stencil::Fourth, move |x| t.eval(x), move |x| f.eval(x)).unwrap()
    };
    let op2 = {
        let (t, f) = (trap.clone(), field.clone());
        OneBody::from_samplers(n, half, Stencil::Fourth, move |x| t.eval(x), move |x| {
            let a = f.eval(x);
            let g = grad_chi(x);
            [a[0] + g[0], a[1] + g[1], a[2] + g[2]]
        })
        .unwrap()
    };
    let u = random_normalized(&op, 9);
    let e = gp_energy(&u, &op, 1.3).unwrap();
    let rotated: Vec<Complex64> = u.iter().map(|z| z * Complex64::from_polar(1.0, 0.77)).collect();
    assert!((gp_energy(&rotated, &op, 1.3).unwrap() - e).abs() < 1e-14 * e.abs().max(1.0) * 10.0);
    let transformed: Vec<Complex64> = (0..op.sites())
        .map(|s| u[s] * Complex64::from_polar(1.0, -chi(op.lattice.position(s))))
        .collect();
    let e2 = gp_energy(&transformed, &op2, 1.3).unwrap();
    assert!((e2 - e).abs() < 1e-10, "{e2} vs {e}");
    // The exact lattice transform.
    let chis: Vec<f64> = (0..op.sites()).map(|s| chi(op.lattice.position(s))).collect();
    let op3 = op.gauge_transformed(&chis).unwrap();
    assert!((gp_energy(&transformed, &op3, 1.3).unwrap() - e).abs() < 1e-12);
}

#[test]
fn minimum_is_monotone_and_concave_in_the_coupling() {
    let op = OneBodySpec::harmonic(20).build().unwrap();
    let e: Vec<f64> = [0.0, 1.0, 2.0].iter().map(|&g| minimize_gp(&op, g, 1e-9, 4).unwrap().e_gp).collect();
    assert!(e[0] <= e[1] && e[1] <= e[2]);
    assert!(e[1] >= 0.5 * (e[0] + e[2]) - 1e-10);
}

#[test]
fn two_seeds_give_the_same_density() {
    let op = OneBodySpec::harmonic(20).build().unwrap();
    let a = minimize_gp(&op, 1.5, 1e-10, 11).unwrap();
    let b = minimize_gp(&op, 1.5, 1e-10, 12).unwrap();
    let w = op.cell_volume();
    let d: f64 = a.u.iter().zip(&b.u).map(|(x, y)| (x.norm() - y.norm()).powi(2)).sum::<f64>();
    assert!((w * d).sqrt() < 1e-4);
}

#[test]
fn residual_falsifier_and_input_checks() {
    let op = OneBodySpec::harmonic(12).build().unwrap();
    let u = random_normalized(&op, 2);
    let st = GPState {
        u: u.clone(),
        e_gp: 0.0,
        eps0: 0.0,
        el_residual: 0.0,
        gradient_norm: 0.0,
        iterations: 0,
        coupling: 1.0,
        seed: 0,
        grid: GridMeta::of(&op),
        energy_history: vec![],
    };
    assert!(el_residual(&st, &op).unwrap() > 1.0);
    let doubled: Vec<Complex64> = u.iter().map(|z| z * 2.0).collect();
    assert!(gp_energy(&doubled, &op, 1.0).is_err());
    assert!(minimize_gp(&op, -1.0, 1e-8, 0).is_err());
}

#[test]
fn mean_field_dominates_gp_when_b_is_smaller() {
    let op = OneBodySpec::harmonic(16).build().unwrap();
    let v = PotentialSpec::gaussian6d(50.0, 1.0, 1.0).unwrap();
    let int_v = v.integral().unwrap();
    let mf = mean_field_energy(&op, int_v, 1e-9, 1).unwrap();
    let gp = minimize_gp(&op, 0.8 * int_v / 6.0, 1e-9, 1).unwrap();
    assert!(mf.e_gp >= gp.e_gp);
    let zero = mean_field_energy(&op, 0.0, 1e-9, 1).unwrap();
    assert!(zero.e_gp < gp.e_gp);
}

#[test]
fn hartree_reduces_to_one_body_energy_without_interaction() {
    let op = OneBodySpec::harmonic(12).build().unwrap();
    let u = random_normalized(&op, 3);
    let e = hartree_energy_per_particle(&u, &PotentialSpec::zero(6), 5, &op).unwrap();
    assert!((e - one_body_energy(&u, &op).unwrap()).abs() < 1e-14);
    assert!(hartree_energy_per_particle(&u, &PotentialSpec::zero(6), 2, &op).is_err());
}
