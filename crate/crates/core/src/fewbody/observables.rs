use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::basis::{sort_small, Basis, MAX_PARTICLES};
use super::system::{hermitian_eigenvalues, FewBodySystem};
use crate::error::{Error, Result};
use crate::linalg::{lanczos_lowest, symmetric_eigenvalues, LanczosOptions};

/// Largest k-particle basis for which a dense density matrix is formed.
pub const MAX_RDM_DIM: usize = 4096;

/// `gamma^(k)` in the normalized occupation basis of k bosons.
#[derive(Clone, Debug)]
pub struct ReducedDensityMatrix {
    pub k: usize,
    pub basis: Basis,
    pub matrix: DMatrix<Complex64>,
    pub trace: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityMatrixSummary {
    pub k: usize,
    pub dim: usize,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub hermiticity_defect: f64,
}

impl ReducedDensityMatrix {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.matrix.nrows();
        if self.matrix.iter().all(|z| z.im == 0.0) {
            symmetric_eigenvalues(DMatrix::from_fn(n, n, |i, j| self.matrix[(i, j)].re))
        } else {
            hermitian_eigenvalues(n, |i, j| self.matrix[(i, j)])
        }
    }

    /// Largest eigenvalue; iterative above a few hundred rows.
    pub fn largest_eigenvalue(&self) -> f64 {
        let n = self.matrix.nrows();
        if n <= 300 {
            return *self.eigenvalues().last().unwrap();
        }
        let opts = LanczosOptions { tol: 1e-13, abs_tol: 1e-14, ..Default::default() };
        let r = lanczos_lowest(
            n,
            |x: &[Complex64], y: &mut [Complex64]| {
                let v = &self.matrix * nalgebra::DVector::from_column_slice(x);
                y.iter_mut().zip(v.iter()).for_each(|(a, b)| *a = -b);
            },
            None,
            &opts,
        );
        match r {
            Ok(r) => -r.values[0],
            Err(_) => *self.eigenvalues().last().unwrap(),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut d = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                d = d.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn summary(&self) -> DensityMatrixSummary {
        let ev = self.eigenvalues();
        DensityMatrixSummary {
            k: self.k,
            dim: self.matrix.nrows(),
            trace: self.trace,
            min_eigenvalue: ev[0],
            max_eigenvalue: ev[ev.len() - 1],
            hermiticity_defect: self.hermiticity_defect(),
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Distinct sub-multisets of size k of a sorted tuple, with
/// `prod_i sqrt(C(nu_i, m_i))` and the remaining sorted tuple.
fn sub_multisets(st: &[u16], k: usize) -> Vec<([u16; MAX_PARTICLES], [u16; MAX_PARTICLES], f64)> {
    let n = st.len();
    let mut out: Vec<([u16; MAX_PARTICLES], [u16; MAX_PARTICLES], f64)> = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut m = [0u16; MAX_PARTICLES];
        let mut rest = [0u16; MAX_PARTICLES];
        let (mut a, mut b) = (0, 0);
        for (i, &s) in st.iter().enumerate() {
            if mask & (1 << i) != 0 {
                m[a] = s;
                a += 1;
            } else {
                rest[b] = s;
                b += 1;
            }
        }
        if out.iter().any(|(mm, _, _)| mm[..k] == m[..k]) {
            continue;
        }
        let mut coef = 1.0;
        let mut i = 0;
        while i < n {
            let s = st[i];
            let nu = st.iter().filter(|&&x| x == s).count();
            let mi = m[..k].iter().filter(|&&x| x == s).count();
            coef *= binomial(nu, mi);
            i += nu;
        }
        out.push((m, rest, coef.sqrt()));
    }
    out
}

/// `gamma^(k) = Tr_{k+1..n} |psi><psi|`, averaged over the given states.
///
/// In the occupation basis, `<m|gamma|m'> = C(n,k)^-1 sum_mu (A_m psi)_mu conj((A_m' psi)_mu)`
/// with `A_m = prod_i a_i^{m_i} / sqrt(m_i!)`.
pub fn reduced_density_matrix(sys: &FewBodySystem, states: &[Vec<Complex64>], k: usize) -> Result<ReducedDensityMatrix> {
    let n = sys.particles;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("density matrix order k={k} must be in 1..={n}")));
    }
    if states.is_empty() {
        return Err(Error::invalid("no states given"));
    }
    let kb = Basis::new(sys.basis.sites, k)?;
    if kb.len() > MAX_RDM_DIM {
        return Err(Error::TooLarge {
            what: format!("dense {k}-body density matrix"),
            estimate: kb.len() as u128,
            limit: MAX_RDM_DIM as u128,
        });
    }
    let rb = Basis::new(sys.basis.sites, n - k)?;
    let dim = kb.len();
    let mut total = DMatrix::<Complex64>::zeros(dim, dim);
    for psi in states {
        if psi.len() != sys.dim() {
            return Err(Error::DimensionMismatch { expected: sys.dim(), got: psi.len() });
        }
        let real = psi.iter().all(|z| z.im == 0.0);
        let (rbr, kbr) = (&rb, &kb);
        // Rows: remaining (n-k)-particle states; columns: k-particle states.
        let mut entries: Vec<(usize, usize, Complex64)> = (0..sys.dim())
            .into_par_iter()
            .flat_map_iter(|i| {
                let st = sys.basis.state(i);
                let amp = psi[i];
                sub_multisets(st, k).into_iter().map(move |(m, rest, c)| {
                    let mut m = m;
                    let mut rest = rest;
                    sort_small(&mut m[..k]);
                    sort_small(&mut rest[..n - k]);
                    (rbr.rank(&rest[..n - k]), kbr.rank(&m[..k]), amp * c)
                })
            })
            .collect();
        entries.sort_by_key(|e| (e.0, e.1));
        let rows = rb.len();
        if real {
            let mut x = DMatrix::<f64>::zeros(rows, dim);
            for (r, c, v) in &entries {
                x[(*r, *c)] += v.re;
            }
            let g = x.transpose() * &x;
            total += g.map(|v| Complex64::new(v, 0.0));
        } else {
            let mut x = DMatrix::<Complex64>::zeros(rows, dim);
            for (r, c, v) in &entries {
                x[(*r, *c)] += *v;
            }
            total += x.transpose() * x.conjugate();
        }
        entries.clear();
    }
    let scale = 1.0 / (binomial(n, k) * states.len() as f64);
    total *= Complex64::new(scale, 0.0);
    let trace = (0..dim).map(|i| total[(i, i)].re).sum();
    Ok(ReducedDensityMatrix { k, basis: kb, matrix: total, trace })
}

/// `Tr_k gamma^(k)` as a (k-1)-body density matrix:
/// `<m|gamma^(k-1)|m'> = (1/k) sum_j sqrt((m_j+1)(m'_j+1)) <m+e_j|gamma^(k)|m'+e_j>`.
pub fn partial_trace(g: &ReducedDensityMatrix) -> Result<ReducedDensityMatrix> {
    if g.k < 2 {
        return Err(Error::invalid("partial trace needs k >= 2"));
    }
    let k = g.k;
    let lb = Basis::new(g.basis.sites, k - 1)?;
    let dim = lb.len();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    let mut buf = [0u16; MAX_PARTICLES];
    let mut buf2 = [0u16; MAX_PARTICLES];
    for a in 0..dim {
        for b in 0..dim {
            let ma = lb.state(a);
            let mb = lb.state(b);
            let mut acc = Complex64::default();
            for j in 0..g.basis.sites {
                buf[..k - 1].copy_from_slice(ma);
                buf[k - 1] = j as u16;
                sort_small(&mut buf[..k]);
                buf2[..k - 1].copy_from_slice(mb);
                buf2[k - 1] = j as u16;
                sort_small(&mut buf2[..k]);
                let na = ma.iter().filter(|&&x| x as usize == j).count() as f64 + 1.0;
                let nb = mb.iter().filter(|&&x| x as usize == j).count() as f64 + 1.0;
                acc += g.matrix[(g.basis.rank(&buf[..k]), g.basis.rank(&buf2[..k]))] * (na * nb).sqrt();
            }
            out[(a, b)] = acc / k as f64;
        }
    }
    let trace = (0..dim).map(|i| out[(i, i)].re).sum();
    Ok(ReducedDensityMatrix { k: k - 1, basis: lb, matrix: out, trace })
}

/// Largest eigenvalue of gamma^(1).
pub fn condensate_fraction(gamma1: &ReducedDensityMatrix) -> Result<f64> {
    if gamma1.k != 1 {
        return Err(Error::invalid(format!("condensate fraction needs k = 1, got {}", gamma1.k)));
    }
    Ok(gamma1.largest_eigenvalue())
}

/// The symmetric state u^{(x)n}: `psi_nu = sqrt(n! / prod nu_i!) prod u_{a}`.
pub fn product_state(sys: &FewBodySystem, u: &[Complex64]) -> Result<Vec<Complex64>> {
    if u.len() != sys.basis.sites {
        return Err(Error::DimensionMismatch { expected: sys.basis.sites, got: u.len() });
    }
    let n = sys.particles;
    let nf = factorial(n);
    Ok((0..sys.dim())
        .into_par_iter()
        .map(|i| {
            let st = sys.basis.state(i);
            let mut denom = 1.0;
            let mut j = 0;
            while j < n {
                let c = st.iter().filter(|&&x| x == st[j]).count();
                denom *= factorial(c);
                j += c;
            }
            let mut amp = Complex64::new((nf / denom).sqrt(), 0.0);
            for &s in st {
                amp *= u[s as usize];
            }
            amp
        })
        .collect())
}

/// `< prod_{i=2..4} 1(|x_1 - x_i| <= r) >` averaged over the given states.
pub fn four_body_collision(sys: &FewBodySystem, states: &[Vec<Complex64>], r: f64) -> Result<f64> {
    if sys.particles != 4 {
        return Err(Error::precondition(format!("four-body collision needs 4 particles, got {}", sys.particles)));
    }
    if states.is_empty() {
        return Err(Error::invalid("no states given"));
    }
    let lat = &sys.onebody.lattice;
    let pos: Vec<[f64; 3]> = (0..lat.sites()).map(|s| lat.position(s)).collect();
    let r2 = r * r * (1.0 + 1e-12);
    let within = |a: u16, b: u16| {
        let (p, q) = (pos[a as usize], pos[b as usize]);
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2) <= r2
    };
    // Fraction of labelings of a configuration in which particle 1 is
    // within r of the other three.
    let weights: Vec<f64> = (0..sys.dim())
        .into_par_iter()
        .map(|i| {
            let st = sys.basis.state(i);
            let hits = (0..4).filter(|&a| (0..4).filter(|&b| b != a).all(|b| within(st[a], st[b]))).count();
            hits as f64 / 4.0
        })
        .collect();
    let mut total = 0.0;
    for psi in states {
        total += psi.iter().zip(&weights).map(|(z, w)| z.norm_sqr() * w).sum::<f64>();
    }
    Ok(total / states.len() as f64)
}
