use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::basis::{sort_small, Basis, MAX_PARTICLES};
use super::interaction::ThreeBodyWeights;
use crate::error::{Error, Result};
use crate::gp::OneBody;
use crate::linalg::{lanczos_lowest, symmetric_eigen, symmetric_eigenvalues, LanczosOptions, Scalar, CHUNK};

/// `H = sum_i h_i + sum_{i<j<k} W(x_i - x_j, x_i - x_k)` on the bosonic
/// subspace of `n` particles on the sites of a one-body lattice.
#[derive(Clone, Debug)]
pub struct FewBodySystem {
    pub onebody: OneBody,
    pub particles: usize,
    pub interaction: ThreeBodyWeights,
    pub basis: Basis,
    diagonal: Vec<f64>,
}

pub fn build_system(onebody: OneBody, particles: usize, interaction: ThreeBodyWeights) -> Result<FewBodySystem> {
    if particles == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    if (interaction.spacing - onebody.spacing()).abs() > 1e-12 * onebody.spacing() {
        return Err(Error::precondition(format!(
            "interaction weights are for spacing {}, the lattice has {}",
            interaction.spacing,
            onebody.spacing()
        )));
    }
    let basis = Basis::new(onebody.sites(), particles)?;
    let lattice = onebody.lattice.clone();
    let coords: Vec<[i64; 3]> = (0..lattice.sites())
        .map(|s| {
            let c = lattice.coords(s);
            [c[0] as i64, c[1] as i64, c[2] as i64]
        })
        .collect();
    let diagonal: Vec<f64> = (0..basis.len())
        .into_par_iter()
        .map(|i| {
            let st = basis.state(i);
            let mut d: f64 = st.iter().map(|&s| onebody.diagonal[s as usize]).sum();
            if !interaction.is_zero() {
                for a in 0..st.len() {
                    for b in a + 1..st.len() {
                        for c in b + 1..st.len() {
                            let (x, y, z) = (coords[st[a] as usize], coords[st[b] as usize], coords[st[c] as usize]);
                            d += interaction.get(
                                [x[0] - y[0], x[1] - y[1], x[2] - y[2]],
                                [x[0] - z[0], x[1] - z[1], x[2] - z[2]],
                            );
                        }
                    }
                }
            }
            d
        })
        .collect();
    Ok(FewBodySystem { onebody, particles, interaction, basis, diagonal })
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundState {
    pub energy: f64,
    /// Orthonormal basis of the numerically degenerate ground space.
    #[serde(skip)]
    pub vectors: Vec<Vec<Complex64>>,
    pub degeneracy: usize,
    /// Lowest eigenvalues returned by the solver.
    pub lowest: Vec<f64>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

impl FewBodySystem {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Diagonal of H in the occupation basis.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// y = H x. Each output entry gathers the hops into it, so rows are
    /// independent and the result does not depend on the thread count.
    pub fn apply<T: Scalar>(&self, x: &[T], y: &mut [T]) {
        let n = self.particles;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, yc)| {
            let mut buf = [0u16; MAX_PARTICLES];
            for (k, out) in yc.iter_mut().enumerate() {
                let i = ci * CHUNK + k;
                let st = self.basis.state(i);
                let mut acc = x[i] * self.diagonal[i];
                let mut p = 0;
                while p < n {
                    let s = st[p] as usize;
                    let mut q = p;
                    while q < n && st[q] as usize == s {
                        q += 1;
                    }
                    let ns = (q - p) as f64;
                    for (t, h) in self.onebody.row(s) {
                        let nt = st.iter().filter(|&&a| a as usize == t).count() as f64;
                        buf[..n].copy_from_slice(st);
                        buf[p] = t as u16;
                        sort_small(&mut buf[..n]);
                        let j = self.basis.rank(&buf[..n]);
                        acc += T::from_complex(h) * x[j] * (ns * (nt + 1.0)).sqrt();
                    }
                    p = q;
                }
                *out = acc;
            }
        });
    }

    pub fn is_real(&self) -> bool {
        self.onebody.is_real()
    }

    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::default(); x.len()];
        self.apply(x, &mut y);
        y
    }
}

/// Lowest eigenpairs of H. The ground space is every returned eigenvector
/// within `1e-10 |E|` of the minimum.
pub fn ground_state(sys: &FewBodySystem, tol: f64) -> Result<GroundState> {
    let dim = sys.dim();
    let nev = 3.min(dim);
    if dim <= 400 {
        return dense_ground_state(sys, nev);
    }
    let scale = sys.diagonal.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let opts = LanczosOptions { nev, max_basis: 24, tol, abs_tol: 1e-3 * tol * scale, ..Default::default() };
    let (lowest, vectors, residuals, matvecs) = if sys.is_real() {
        let r = lanczos_lowest(dim, |x: &[f64], y: &mut [f64]| sys.apply(x, y), None, &opts)?;
        let v: Vec<Vec<Complex64>> =
            r.vectors.into_iter().map(|v| v.into_iter().map(|a| Complex64::new(a, 0.0)).collect()).collect();
        (r.values, v, r.residuals, r.matvecs)
    } else {
        let r = lanczos_lowest(dim, |x: &[Complex64], y: &mut [Complex64]| sys.apply(x, y), None, &opts)?;
        (r.values, r.vectors, r.residuals, r.matvecs)
    };
    Ok(collect_ground(lowest, vectors, residuals, matvecs))
}

fn collect_ground(lowest: Vec<f64>, vectors: Vec<Vec<Complex64>>, residuals: Vec<f64>, matvecs: usize) -> GroundState {
    let e = lowest[0];
    let degeneracy = lowest.iter().filter(|&&l| l - e <= 1e-10 * e.abs().max(1e-300)).count();
    GroundState {
        energy: e,
        vectors: vectors.into_iter().take(degeneracy).collect(),
        degeneracy,
        lowest,
        residuals,
        matvecs,
    }
}

/// Dense Hermitian diagonalization for small bases, through the real
/// symmetric embedding `[[Re, -Im], [Im, Re]]`.
fn dense_ground_state(sys: &FewBodySystem, nev: usize) -> Result<GroundState> {
    let dim = sys.dim();
    let mut cols = Vec::with_capacity(dim);
    let mut e = vec![Complex64::default(); dim];
    for j in 0..dim {
        e.iter_mut().for_each(|z| *z = Complex64::default());
        e[j] = Complex64::new(1.0, 0.0);
        cols.push(sys.apply_complex(&e));
    }
    let (vals, vecs) = hermitian_eigen(dim, |i, j| cols[j][i]);
    let mut lowest = Vec::new();
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    // Each eigenvalue appears twice in the embedding.
    let mut k = 0;
    while lowest.len() < nev && k < vals.len() {
        let v: Vec<Complex64> = (0..dim).map(|i| Complex64::new(vecs[(i, k)], vecs[(i + dim, k)])).collect();
        let independent = vectors.iter().all(|w: &Vec<Complex64>| {
            let ov: Complex64 = w.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            ov.norm() < 0.5
        });
        if independent {
            let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let v: Vec<Complex64> = v.iter().map(|z| z / nrm).collect();
            let hv = sys.apply_complex(&v);
            let th: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
            let res = hv.iter().zip(&v).map(|(a, b)| (a - b * th).norm_sqr()).sum::<f64>().sqrt();
            lowest.push(th);
            vectors.push(v);
            residuals.push(res);
        }
        k += 1;
    }
    Ok(collect_ground(lowest, vectors, residuals, dim))
}

/// Eigen-decomposition of a Hermitian matrix given entrywise, via the
/// real embedding of size 2n. Eigenvalues come in equal pairs.
pub(crate) fn hermitian_eigen(n: usize, entry: impl Fn(usize, usize) -> Complex64) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let mut m = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = entry(i, j);
            m[(i, j)] = z.re;
            m[(i + n, j + n)] = z.re;
            m[(i, j + n)] = -z.im;
            m[(i + n, j)] = z.im;
        }
    }
    symmetric_eigen(m)
}

pub(crate) fn hermitian_eigenvalues(n: usize, entry: impl Fn(usize, usize) -> Complex64) -> Vec<f64> {
    let mut m = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = entry(i, j);
            m[(i, j)] = z.re;
            m[(i + n, j + n)] = z.re;
            m[(i, j + n)] = -z.im;
            m[(i + n, j)] = z.im;
        }
    }
    symmetric_eigenvalues(m).into_iter().step_by(2).collect()
}

/// Lowest eigenvalue of the one-body operator, by dense diagonalization.
pub fn one_body_ground_energy(op: &OneBody) -> f64 {
    let n = op.sites();
    let mut dense = vec![Complex64::default(); n * n];
    for s in 0..n {
        dense[s * n + s] = Complex64::new(op.diagonal[s], 0.0);
        for (t, h) in op.row(s) {
            dense[s * n + t] = h;
        }
    }
    if op.is_real() {
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| dense[i * n + j].re);
        symmetric_eigenvalues(m)[0]
    } else {
        hermitian_eigenvalues(n, |i, j| dense[i * n + j])[0]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BindingReport {
    pub energies: Vec<f64>,
    pub increments: Vec<f64>,
    pub pass: bool,
}

/// E(m) for m = 1..=m_max with the same one-body operator and weights.
pub fn binding_check(onebody: &OneBody, interaction: &ThreeBodyWeights, m_max: usize, tol: f64) -> Result<BindingReport> {
    if m_max == 0 || m_max > MAX_PARTICLES {
        return Err(Error::invalid(format!("m_max must be in 1..={MAX_PARTICLES}, got {m_max}")));
    }
    let mut energies = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let sys = build_system(onebody.clone(), m, interaction.clone())?;
        energies.push(ground_state(&sys, tol)?.energy);
    }
    let increments: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    let pass = increments.iter().all(|&d| d >= 0.0);
    Ok(BindingReport { energies, increments, pass })
}
