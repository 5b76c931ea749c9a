use num_complex::Complex64;

use super::*;
use crate::gp::{hartree_interaction, mean_field_energy, one_body_energy, OneBody, OneBodySpec, Stencil, Trap, VectorPotential};
use crate::linalg::{dot, random_vector};
use crate::potential::PotentialSpec;
use crate::scattering::scale_potential;

fn onebody(l: usize, spacing: f64, field: VectorPotential) -> OneBody {
    OneBodySpec {
        trap: Trap::Harmonic { omega: [1.0; 3] },
        field,
        points: l,
        half_width: Some(0.5 * (l as f64 + 1.0) * spacing),
        stencil: Some(Stencil::Second),
    }
    .build()
    .unwrap()
}

fn weights(amplitude: f64, n_scale: u64, spacing: f64) -> ThreeBodyWeights {
    let v = PotentialSpec::gaussian6d(amplitude, 1.0, 1.0).unwrap();
    ThreeBodyWeights::hat_averaged(&scale_potential(&v, n_scale, 0.5).unwrap(), spacing).unwrap()
}

fn normalized(v: Vec<Complex64>) -> Vec<Complex64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

#[test]
fn hamiltonian_is_hermitian() {
    let ob = onebody(3, 0.6, VectorPotential::Uniform { b: [0.3, 0.5, -0.4] });
    let sys = build_system(ob, 3, weights(20.0, 3, 0.6)).unwrap();
    let mut worst = 0.0f64;
    for k in 0..100 {
        let x: Vec<Complex64> = random_vector(sys.dim(), 2 * k);
        let y: Vec<Complex64> = random_vector(sys.dim(), 2 * k + 1);
        let a = dot(&y, &sys.apply_complex(&x));
        let b = dot(&x, &sys.apply_complex(&y)).conj();
        worst = worst.max((a - b).norm() / a.norm().max(1.0));
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn free_bosons_act_as_one_body_copies() {
    let ob = onebody(3, 0.6, VectorPotential::Uniform { b: [0.0, 0.2, 0.7] });
    let sys = build_system(ob.clone(), 3, ThreeBodyWeights::zero(0.6)).unwrap();
    let sites = ob.sites();
    for k in 0..50 {
        let u = normalized(random_vector(sites, 1000 + k));
        let v = normalized(random_vector(sites, 2000 + k));
        let pu = product_state(&sys, &u).unwrap();
        let pv = product_state(&sys, &v).unwrap();
        let lhs = dot(&pv, &sys.apply_complex(&pu));
        let mut hu = vec![Complex64::default(); sites];
        ob.apply(&u, &mut hu);
        let rhs = dot(&v, &hu) * dot(&v, &u) * dot(&v, &u) * 3.0;
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn non_interacting_energy_is_n_times_e1() {
    let ob = onebody(4, 0.5, VectorPotential::None);
    let e1 = one_body_ground_energy(&ob);
    for n in [2usize, 3] {
        let sys = build_system(ob.clone(), n, ThreeBodyWeights::zero(0.5)).unwrap();
        let gs = ground_state(&sys, 1e-11).unwrap();
        assert!((gs.energy - n as f64 * e1).abs() <= 1e-10 * gs.energy, "{n}: {} vs {}", gs.energy, n as f64 * e1);
        let g1 = reduced_density_matrix(&sys, &gs.vectors, 1).unwrap();
        assert!((condensate_fraction(&g1).unwrap() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn energies_increase_with_particle_number() {
    let ob = onebody(4, 0.5, VectorPotential::None);
    let w = weights(50.0, 3, 0.5);
    let rep = binding_check(&ob, &w, 3, 1e-10).unwrap();
    assert!(rep.pass, "{:?}", rep.energies);
    let e1 = rep.energies[0];
    assert!(rep.energies[2] >= 3.0 * e1);
    // Only n = 3 feels a three-body interaction.
    assert!((rep.energies[1] - 2.0 * e1).abs() < 1e-9 * e1);
    assert!(rep.energies[2] > 3.0 * e1 + 1e-6);
}

#[test]
fn product_state_density_matrix_is_pure() {
    let ob = onebody(3, 0.6, VectorPotential::Uniform { b: [0.4, 0.0, 0.1] });
    let sys = build_system(ob.clone(), 3, ThreeBodyWeights::zero(0.6)).unwrap();
    let u = normalized(random_vector(ob.sites(), 77));
    let psi = product_state(&sys, &u).unwrap();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    assert!((norm - 1.0).abs() < 1e-12);
    let g = reduced_density_matrix(&sys, &[psi], 1).unwrap();
    let mut worst = 0.0f64;
    for i in 0..ob.sites() {
        for j in 0..ob.sites() {
            worst = worst.max((g.matrix[(i, j)] - u[i] * u[j].conj()).norm());
        }
    }
    assert!(worst < 1e-14, "{worst}");
}

#[test]
fn density_matrices_are_consistent_under_partial_trace() {
    let field = VectorPotential::Uniform { b: [0.0, 0.3, 0.5] };
    for l in [2usize, 3] {
        let sys = build_system(onebody(l, 0.6, field.clone()), 3, weights(30.0, 3, 0.6)).unwrap();
        let gs = ground_state(&sys, 1e-10).unwrap();
        let g1 = reduced_density_matrix(&sys, &gs.vectors, 1).unwrap();
        let g2 = reduced_density_matrix(&sys, &gs.vectors, 2).unwrap();
        let mut all = vec![g1.clone(), g2.clone()];
        if l == 2 {
            all.push(reduced_density_matrix(&sys, &gs.vectors, 3).unwrap());
        }
        for g in &all {
            assert!((g.trace - 1.0).abs() < 1e-12);
            let s = g.summary();
            assert!(s.min_eigenvalue >= -1e-12 && s.hermiticity_defect < 1e-14, "{s:?}");
        }
        let t2 = partial_trace(&g2).unwrap();
        assert!((&t2.matrix - &g1.matrix).norm() < 1e-12);
        if l == 2 {
            let t3 = partial_trace(&partial_trace(&all[2]).unwrap()).unwrap();
            assert!((&t3.matrix - &g1.matrix).norm() < 1e-12);
        }
        assert!(reduced_density_matrix(&sys, &gs.vectors, 4).is_err());
    }
}

#[test]
fn condensation_weakens_with_interaction_strength() {
    let ob = onebody(4, 0.5, VectorPotential::None);
    let mut frac = Vec::new();
    let mut top2 = Vec::new();
    for amp in [5.0, 50.0, 500.0] {
        let sys = build_system(ob.clone(), 3, weights(amp, 3, 0.5)).unwrap();
        let gs = ground_state(&sys, 1e-10).unwrap();
        frac.push(condensate_fraction(&reduced_density_matrix(&sys, &gs.vectors, 1).unwrap()).unwrap());
        let g2 = reduced_density_matrix(&sys, &gs.vectors, 2).unwrap();
        top2.push(g2.largest_eigenvalue());
    }
    assert!(frac[0] > 0.9, "{frac:?}");
    assert!(frac[0] >= frac[1] && frac[1] >= frac[2], "{frac:?}");
    assert!(top2[0] < 1.0 && top2[0] >= top2[1] && top2[1] >= top2[2], "{top2:?}");
}

#[test]
fn four_body_collision_limits_and_monotonicity() {
    let h = 0.6;
    let ob = onebody(3, h, VectorPotential::None);
    let sys = build_system(ob.clone(), 4, weights(50.0, 4, h)).unwrap();
    let gs = ground_state(&sys, 1e-10).unwrap();
    let all = four_body_collision(&sys, &gs.vectors, 10.0).unwrap();
    assert!((all - 1.0).abs() < 1e-12);
    let same_site: f64 = (0..sys.dim())
        .filter(|&i| sys.basis.state(i).iter().all(|&s| s == sys.basis.state(i)[0]))
        .map(|i| gs.vectors.iter().map(|v| v[i].norm_sqr()).sum::<f64>() / gs.vectors.len() as f64)
        .sum();
    let tiny = four_body_collision(&sys, &gs.vectors, 0.5 * h).unwrap();
    assert!((tiny - same_site).abs() < 1e-14);
    let diameter = 2.0 * 3f64.sqrt() * h;
    let mut last = f64::INFINITY;
    let mut r = diameter;
    for _ in 0..3 {
        let p = four_body_collision(&sys, &gs.vectors, r).unwrap();
        assert!(p < last, "r={r}: {p} vs {last}");
        last = p;
        r *= 0.5;
    }
    // Below the spacing only coincident sites count.
    assert!((last - same_site).abs() < 1e-14);
    let three = build_system(ob, 3, weights(50.0, 3, h)).unwrap();
    assert!(four_body_collision(&three, &[vec![Complex64::new(1.0, 0.0); three.dim()]], 1.0).is_err());
}

#[test]
fn hartree_bounds_the_ground_energy() {
    let h = 0.5;
    let ob = onebody(4, h, VectorPotential::None);
    let v = PotentialSpec::gaussian6d(50.0, 1.0, 1.0).unwrap();
    let w = ThreeBodyWeights::hat_averaged(&scale_potential(&v, 3, 0.5).unwrap(), h).unwrap();
    let sys = build_system(ob.clone(), 3, w.clone()).unwrap();
    let e3 = ground_state(&sys, 1e-10).unwrap().energy;
    let u = mean_field_energy(&ob, v.integral().unwrap(), 1e-9, 1).unwrap().u;
    let hartree = one_body_energy(&u, &ob).unwrap() + hartree_interaction(&u, &ob, &w, 3);
    assert!(hartree >= e3 / 3.0, "{hartree} vs {}", e3 / 3.0);
    assert!(e3 / 3.0 >= one_body_ground_energy(&ob));
}
