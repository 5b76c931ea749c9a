use nalgebra::DMatrix;

use super::{axpy, dot, norm, random_vector, scale, symmetric_eigen, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Number of lowest eigenpairs wanted.
    pub nev: usize,
    /// Basis size before a thick restart.
    pub max_basis: usize,
    /// Convergence when residual <= max(tol * |theta|, abs_tol).
    pub tol: f64,
    pub abs_tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { nev: 1, max_basis: 40, tol: 1e-10, abs_tol: 0.0, max_restarts: 500, seed: 42 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPairs<T> {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<T>>,
    /// True residual norms ||A y - theta y|| of the returned pairs.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    /// Lowest Ritz value after each restart cycle.
    pub ritz_history: Vec<f64>,
}

/// Thick-restart Lanczos with full reorthogonalization for the lowest
/// eigenpairs of a Hermitian operator.
pub fn lanczos_lowest<T: Scalar>(
    n: usize,
    apply: impl Fn(&[T], &mut [T]),
    start: Option<&[T]>,
    opts: &LanczosOptions,
) -> Result<EigenPairs<T>> {
    if n == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let nev = opts.nev.max(1).min(n);
    let m = opts.max_basis.max(nev + 2).min(n);
    let mut v0: Vec<T> = match start {
        Some(s) if s.len() == n && norm(s) > 0.0 => s.to_vec(),
        _ => random_vector(n, opts.seed),
    };
    let nv = norm(&v0);
    scale(1.0 / nv, &mut v0);

    let mut basis: Vec<Vec<T>> = vec![v0];
    let mut tmat = DMatrix::<f64>::zeros(m, m);
    let mut matvecs = 0usize;
    let mut history = Vec::new();
    let mut w = vec![T::default(); n];

    for _restart in 0..=opts.max_restarts {
        let mut beta;
        // Expand the basis.
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            matvecs += 1;
            for _pass in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let h = dot(vi, &w);
                    axpy(-h, vi, &mut w);
                    tmat[(i, j)] += h.re();
                }
            }
            for i in 0..j {
                tmat[(j, i)] = tmat[(i, j)];
            }
            beta = norm(&w);
            let scale_t = tmat[(j, j)].abs().max(1e-300);
            if basis.len() == m || beta <= 1e-13 * scale_t {
                break;
            }
            let mut next = w.clone();
            scale(1.0 / beta, &mut next);
            basis.push(next);
        }
        let k = basis.len();
        let sub = tmat.view((0, 0), (k, k)).clone_owned();
        let (theta, vecs) = symmetric_eigen(sub);
        history.push(theta[0]);
        let invariant = beta <= 1e-13 * theta.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(1e-300);
        let want = nev.min(k);
        let converged = (0..want).all(|i| {
            let r = beta * vecs[(k - 1, i)].abs();
            r <= (opts.tol * theta[i].abs()).max(opts.abs_tol)
        });
        if converged || invariant || k < m && k == n {
            let mut vectors = Vec::with_capacity(want);
            for col in 0..want {
                let mut y = vec![T::default(); n];
                for (l, vl) in basis.iter().enumerate() {
                    axpy(T::from_re(vecs[(l, col)]), vl, &mut y);
                }
                let ny = norm(&y);
                scale(1.0 / ny, &mut y);
                vectors.push(y);
            }
            let mut residuals = Vec::with_capacity(want);
            let mut values = Vec::with_capacity(want);
            for y in &vectors {
                apply(y, &mut w);
                matvecs += 1;
                let th = dot(y, &w).re();
                axpy(T::from_re(-th), y, &mut w);
                residuals.push(norm(&w));
                values.push(th);
            }
            return Ok(EigenPairs { values, vectors, residuals, matvecs, ritz_history: history });
        }
        // Thick restart: keep the lowest Ritz vectors plus the residual direction.
        let keep = (nev + (m - nev) / 2).min(k - 1).max(nev);
        let mut new_basis = Vec::with_capacity(m);
        for col in 0..keep {
            let mut y = vec![T::default(); n];
            for (l, vl) in basis.iter().enumerate() {
                axpy(T::from_re(vecs[(l, col)]), vl, &mut y);
            }
            new_basis.push(y);
        }
        let mut next = w.clone();
        scale(1.0 / beta, &mut next);
        new_basis.push(next);
        basis = new_basis;
        tmat.fill(0.0);
        for i in 0..keep {
            tmat[(i, i)] = theta[i];
        }
    }
    Err(Error::NonConvergence {
        what: format!("Lanczos (Ritz history {:?})", &history[history.len().saturating_sub(5)..]),
        residual: f64::NAN,
        iterations: matvecs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn laplacian_1d(n: usize) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 2.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        }
    }

    #[test]
    fn lowest_eigenvalues_of_path_laplacian() {
        let n = 400;
        let opts = LanczosOptions { nev: 3, max_basis: 30, tol: 1e-9, abs_tol: 1e-12, ..Default::default() };
        let res = lanczos_lowest(n, laplacian_1d(n), None, &opts).unwrap();
        for k in 0..3 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((res.values[k] - exact).abs() < 1e-10, "{k}: {} vs {exact}", res.values[k]);
        }
    }

    #[test]
    fn hermitian_complex_operator() {
        // Periodic ring with a flux: eigenvalues 2 - 2 cos(2 pi k / n + phi).
        let n = 64;
        let phi = 0.3f64;
        let hop = Complex64::from_polar(1.0, phi);
        let apply = move |x: &[Complex64], y: &mut [Complex64]| {
            for i in 0..n {
                y[i] = x[i] * 2.0 - hop * x[(i + 1) % n] - hop.conj() * x[(i + n - 1) % n];
            }
        };
        let opts = LanczosOptions { nev: 1, max_basis: 40, tol: 1e-12, abs_tol: 1e-12, ..Default::default() };
        let res = lanczos_lowest(n, apply, None, &opts).unwrap();
        let exact = (0..n)
            .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64 + phi).cos())
            .fold(f64::INFINITY, f64::min);
        assert!((res.values[0] - exact).abs() < 1e-11);
        assert!(res.residuals[0] < 1e-9);
    }
}
