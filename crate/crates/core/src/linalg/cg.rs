use super::{axpy, dot, norm, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CgReport {
    pub iterations: usize,
    /// Final ||b - A x|| / ||b||.
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// operator. `x` holds the initial guess and receives the solution. The
/// optional `diag` is used as a Jacobi preconditioner.
pub fn conjugate_gradient<T: Scalar>(
    apply: impl Fn(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::default());
        return Ok(CgReport { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![T::default(); n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    let precond = |r: &[T], z: &mut [T]| match diag {
        Some(d) => {
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                *zi = *ri * (1.0 / di);
            }
        }
        None => z.copy_from_slice(r),
    };
    let mut z = vec![T::default(); n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re();
    let mut ap = vec![T::default(); n];
    let mut rel = norm(&r) / bnorm;
    let mut it = 0;
    while rel > tol {
        if it >= max_iter {
            return Err(Error::NonConvergence {
                what: "conjugate gradient".into(),
                residual: rel,
                iterations: it,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap).re();
        if !(pap > 0.0) {
            return Err(Error::precondition(format!(
                "operator is not positive definite (p.Ap = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        axpy(T::from_re(alpha), &p, x);
        axpy(T::from_re(-alpha), &ap, &mut r);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z).re();
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = *zi + *pi * beta;
        }
        it += 1;
        rel = norm(&r) / bnorm;
    }
    // Recompute the true residual to guard against drift in the recurrence.
    apply(x, &mut ap);
    let mut true_r = 0.0;
    for (a, bi) in ap.iter().zip(b) {
        true_r += (*bi - *a).abs2();
    }
    Ok(CgReport { iterations: it, relative_residual: true_r.sqrt() / bnorm })
}
