//! Removal of the center of mass for three particles on a periodic lattice.
//!
//! For psi(x1, x2, x3) = exp(i P.x1) phi(x1 - x2, x1 - x3) the lattice
//! operator -Delta_1 - Delta_2 - Delta_3 + W(x1 - x2, x1 - x3) acts on phi as
//! a hopping operator on (r2, r3): particle 2 hops r2 -> r2 - e, particle 3
//! hops r3 -> r3 - e, and particle 1 hops (r2, r3) -> (r2 + e, r3 + e) with
//! phase exp(i P.e h). At P = 0 its symbol is eps(p2) + eps(p3) + eps(p2 + p3),
//! the lattice form of 2(p2^2 + p3^2 + p2.p3).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Lattice3};
use crate::potential::PotentialSpec;

/// A function of two relative displacements on a periodic lattice, stored densely.
/// Index `d2 + N d3` where `d2`, `d3` are site indices of the displacements mod L.
#[derive(Clone, Debug)]
pub struct PairPotential {
    pub lattice: Lattice3,
    pub values: Vec<f64>,
}

impl PairPotential {
    pub fn zero(lattice: &Lattice3) -> Self {
        let n = lattice.sites();
        PairPotential { lattice: lattice.clone(), values: vec![0.0; n * n] }
    }

    /// Point samples of a 6D potential at minimum-image relative displacements.
    pub fn from_potential(v: &PotentialSpec, lattice: &Lattice3) -> Result<Self> {
        if v.dim != 6 {
            return Err(Error::DimensionMismatch { expected: 6, got: v.dim });
        }
        if lattice.boundary != Boundary::Periodic {
            return Err(Error::precondition("pair potentials on relative coordinates need a periodic lattice"));
        }
        let n = lattice.sites();
        let h = lattice.spacing;
        let disp: Vec<[f64; 3]> = (0..n)
            .map(|s| {
                let d = lattice.displacement(s, 0);
                [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h]
            })
            .collect();
        let mut values = vec![0.0; n * n];
        for d3 in 0..n {
            for d2 in 0..n {
                let x = [disp[d2][0], disp[d2][1], disp[d2][2], disp[d3][0], disp[d3][1], disp[d3][2]];
                values[d2 + n * d3] = v.eval(&x);
            }
        }
        Ok(PairPotential { lattice: lattice.clone(), values })
    }

    #[inline]
    pub fn at(&self, d2: usize, d3: usize) -> f64 {
        self.values[d2 + self.lattice.sites() * d3]
    }
}

/// Site of the displacement a - b (mod L).
pub(crate) fn sub_site(l: &Lattice3, a: usize, b: usize) -> usize {
    let ca = l.coords(a);
    let cb = l.coords(b);
    let n = l.n;
    l.index([(ca[0] + n - cb[0]) % n, (ca[1] + n - cb[1]) % n, (ca[2] + n - cb[2]) % n])
}

/// `-Delta_1 - Delta_2 - Delta_3 + W(x1 - x2, x1 - x3)` on (Z_L^3)^3.
#[derive(Clone, Debug)]
pub struct ThreeBodyLatticeOperator {
    pub lattice: Lattice3,
    pub w: PairPotential,
}

impl ThreeBodyLatticeOperator {
    pub fn new(lattice: Lattice3, w: Option<PairPotential>) -> Result<Self> {
        let n = lattice.sites();
        if (n as u128).pow(3) > 1 << 26 {
            return Err(Error::TooLarge {
                what: "three-particle lattice vector".into(),
                estimate: (n as u128).pow(3),
                limit: 1 << 26,
            });
        }
        let w = match w {
            Some(w) => {
                if w.lattice != lattice {
                    return Err(Error::invalid("pair potential lives on a different lattice"));
                }
                w
            }
            None => {
                let mut z = PairPotential::zero(&lattice);
                z.lattice = lattice.clone();
                z
            }
        };
        Ok(ThreeBodyLatticeOperator { lattice, w })
    }

    pub fn dim(&self) -> usize {
        self.lattice.sites().pow(3)
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let l = &self.lattice;
        let n = l.sites();
        let nb = l.neighbor_table();
        let inv_h2 = 1.0 / (l.spacing * l.spacing);
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for s3 in 0..n {
            for s2 in 0..n {
                for s1 in 0..n {
                    let idx = s1 + n * (s2 + n * s3);
                    let mut acc = psi[idx] * (18.0 * inv_h2);
                    for k in 0..6 {
                        let t = |o: Option<u32>| o.map(|t| t as usize);
                        if let Some(t1) = t(nb[s1][k]) {
                            acc -= psi[t1 + n * (s2 + n * s3)] * inv_h2;
                        }
                        if let Some(t2) = t(nb[s2][k]) {
                            acc -= psi[s1 + n * (t2 + n * s3)] * inv_h2;
                        }
                        if let Some(t3) = t(nb[s3][k]) {
                            acc -= psi[s1 + n * (s2 + n * t3)] * inv_h2;
                        }
                    }
                    let wv = self.w.at(sub_site(l, s1, s2), sub_site(l, s1, s3));
                    out[idx] = acc + psi[idx] * wv;
                }
            }
        }
        out
    }

    pub fn quadratic_form(&self, psi: &[Complex64]) -> f64 {
        let hp = self.apply(psi);
        crate::linalg::pairwise_sum(psi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).re))
    }
}

/// The reduced operator on phi(r2, r3) at total lattice momentum P.
#[derive(Clone, Debug)]
pub struct RelativeOperator {
    pub lattice: Lattice3,
    pub total_momentum: [f64; 3],
    pub w: PairPotential,
}

pub fn remove_center_of_mass(op: &ThreeBodyLatticeOperator, total_momentum: [f64; 3]) -> Result<RelativeOperator> {
    if op.lattice.boundary != Boundary::Periodic {
        return Err(Error::precondition(
            "center-of-mass removal needs translation invariance (periodic lattice)",
        ));
    }
    for p in total_momentum {
        if !p.is_finite() {
            return Err(Error::invalid("total momentum must be finite"));
        }
    }
    Ok(RelativeOperator {
        lattice: op.lattice.clone(),
        total_momentum,
        w: op.w.clone(),
    })
}

impl RelativeOperator {
    pub fn dim(&self) -> usize {
        self.lattice.sites().pow(2)
    }

    pub fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let l = &self.lattice;
        let n = l.sites();
        let nb = l.neighbor_table();
        let inv_h2 = 1.0 / (l.spacing * l.spacing);
        let phases: Vec<Complex64> = (0..3)
            .map(|a| Complex64::from_polar(1.0, self.total_momentum[a] * l.spacing))
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); phi.len()];
        for r3 in 0..n {
            for r2 in 0..n {
                let idx = r2 + n * r3;
                let mut acc = phi[idx] * (18.0 * inv_h2);
                for axis in 0..3 {
                    let (p2, m2) = (nb[r2][2 * axis].unwrap() as usize, nb[r2][2 * axis + 1].unwrap() as usize);
                    let (p3, m3) = (nb[r3][2 * axis].unwrap() as usize, nb[r3][2 * axis + 1].unwrap() as usize);
                    // particles 2 and 3
                    acc -= (phi[m2 + n * r3] + phi[p2 + n * r3] + phi[r2 + n * m3] + phi[r2 + n * p3]) * inv_h2;
                    // particle 1 moves both relative coordinates
                    acc -= (phases[axis] * phi[p2 + n * p3] + phases[axis].conj() * phi[m2 + n * m3]) * inv_h2;
                }
                out[idx] = acc + phi[idx] * self.w.at(r2, r3);
            }
        }
        out
    }

    pub fn quadratic_form(&self, phi: &[Complex64]) -> f64 {
        let hp = self.apply(phi);
        crate::linalg::pairwise_sum(phi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).re))
    }

    /// psi(x1, x2, x3) = exp(i P.x1) phi(x1 - x2, x1 - x3) on the full lattice.
    pub fn embed(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let l = &self.lattice;
        let n = l.sites();
        let mut psi = vec![Complex64::new(0.0, 0.0); n * n * n];
        for s3 in 0..n {
            for s2 in 0..n {
                for s1 in 0..n {
                    let c = l.coords(s1);
                    let ph: f64 = (0..3).map(|a| self.total_momentum[a] * c[a] as f64 * l.spacing).sum();
                    let r2 = sub_site(l, s1, s2);
                    let r3 = sub_site(l, s1, s3);
                    psi[s1 + n * (s2 + n * s3)] = Complex64::from_polar(1.0, ph) * phi[r2 + n * r3];
                }
            }
        }
        psi
    }
}

/// Lattice dispersion sum_a (2 - 2 cos(k_a h)) / h^2.
pub fn lattice_dispersion(k: [f64; 3], h: f64) -> f64 {
    k.iter().map(|ka| 2.0 - 2.0 * (ka * h).cos()).sum::<f64>() / (h * h)
}

/// Split of the kinetic energy of three plane waves into the center-of-mass
/// part `3 eps(P/3)` and the remainder. Returns (center of mass, relative, total).
pub fn kinetic_split(k1: [f64; 3], k2: [f64; 3], k3: [f64; 3], h: f64) -> (f64, f64, f64) {
    let total = lattice_dispersion(k1, h) + lattice_dispersion(k2, h) + lattice_dispersion(k3, h);
    let p3 = [(k1[0] + k2[0] + k3[0]) / 3.0, (k1[1] + k2[1] + k3[1]) / 3.0, (k1[2] + k2[2] + k3[2]) / 3.0];
    let cm = 3.0 * lattice_dispersion(p3, h);
    (cm, total - cm, total)
}
