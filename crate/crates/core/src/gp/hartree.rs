use num_complex::Complex64;
use rayon::prelude::*;

use super::minimize::one_body_energy;
use super::onebody::OneBody;
use crate::error::{Error, Result};
use crate::fewbody::ThreeBodyWeights;
use crate::lattice::Lattice3;
use crate::linalg::compensated_sum;
use crate::potential::PotentialSpec;
use crate::scattering::scale_potential;

/// `sum_{x,y,z} p_x p_y p_z W(x - y, x - z)` for site probabilities p on a
/// Dirichlet lattice.
pub fn lattice_triple_sum(p: &[f64], lattice: &Lattice3, w: &ThreeBodyWeights) -> f64 {
    if w.is_zero() {
        return 0.0;
    }
    let n = lattice.n as i64;
    let parts: Vec<f64> = (0..lattice.sites())
        .into_par_iter()
        .with_min_len(512)
        .map(|s| {
            if p[s] == 0.0 {
                return 0.0;
            }
            let c = lattice.coords(s);
            let c = [c[0] as i64, c[1] as i64, c[2] as i64];
            let site = |d: &[i64; 3]| -> Option<usize> {
                let t = [c[0] - d[0], c[1] - d[1], c[2] - d[2]];
                if t.iter().any(|&x| x < 0 || x >= n) {
                    None
                } else {
                    Some(lattice.index([t[0] as usize, t[1] as usize, t[2] as usize]))
                }
            };
            let mut acc = 0.0;
            for (d1, d2, val) in &w.entries {
                if let (Some(a), Some(b)) = (site(d1), site(d2)) {
                    acc += val * p[a] * p[b];
                }
            }
            p[s] * acc
        })
        .collect();
    compensated_sum(parts)
}

/// Energy per particle of the Hartree state u^{(x)n}:
/// `<u, h u> + ((n-1)(n-2)/6) int V_N(x-y, x-z) |u(x)|^2 |u(y)|^2 |u(z)|^2`
/// with `V_N = n V(n^{1/2} .)` and the triple integral taken with the
/// hat-averaged lattice weights.
pub fn hartree_energy_per_particle(u: &[Complex64], v: &PotentialSpec, n: u64, op: &OneBody) -> Result<f64> {
    if n < 3 {
        return Err(Error::precondition(format!("Hartree energy needs n >= 3, got {n}")));
    }
    if v.dim != 6 {
        return Err(Error::DimensionMismatch { expected: 6, got: v.dim });
    }
    let kinetic = one_body_energy(u, op)?;
    if v.is_zero() {
        return Ok(kinetic);
    }
    let vn = scale_potential(v, n, 0.5)?;
    let w = ThreeBodyWeights::hat_averaged(&vn, op.spacing())?;
    Ok(kinetic + hartree_interaction(u, op, &w, n))
}

/// The interaction part of the Hartree energy for given lattice weights.
pub fn hartree_interaction(u: &[Complex64], op: &OneBody, w: &ThreeBodyWeights, n: u64) -> f64 {
    let vol = op.cell_volume();
    let p: Vec<f64> = u.iter().map(|z| z.norm_sqr() * vol).collect();
    let nf = n as f64;
    (nf - 1.0) * (nf - 2.0) / 6.0 * lattice_triple_sum(&p, &op.lattice, w)
}
