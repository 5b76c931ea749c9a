//! Vector kernels, conjugate gradients and Lanczos eigensolvers.
//!
//! Reductions split vectors into fixed-size chunks and add the chunk
//! results in order, so values do not depend on the thread count.

mod cg;
mod lanczos;

pub use cg::{conjugate_gradient, CgReport};
pub use lanczos::{lanczos_lowest, EigenPairs, LanczosOptions};

use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rayon::prelude::*;

pub const CHUNK: usize = 8192;

/// Field of vector entries: f64 or Complex64.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Default
    + std::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign<f64>
    + 'static
{
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn from_re(x: f64) -> Self;
    fn abs2(self) -> f64;
    /// Pseudo-random entry from two uniforms in [-1, 1).
    fn from_pair(a: f64, b: f64) -> Self;
    /// Real part only for f64.
    fn from_complex(c: Complex64) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn from_re(x: f64) -> Self {
        x
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    fn from_pair(a: f64, _b: f64) -> Self {
        a
    }
    #[inline]
    fn from_complex(c: Complex64) -> Self {
        c.re
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn from_pair(a: f64, b: f64) -> Self {
        Complex64::new(a, b)
    }
    #[inline]
    fn from_complex(c: Complex64) -> Self {
        c
    }
}

/// Eigenvalues (ascending) and matching eigenvector columns of a real
/// symmetric matrix. nalgebra can return eigenvalues paired with the wrong
/// columns, so each value is recomputed as the Rayleigh quotient of its
/// column before sorting.
pub fn symmetric_eigen(a: nalgebra::DMatrix<f64>) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let n = a.nrows();
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let vals: Vec<f64> = (0..n)
        .map(|c| {
            let v = eig.eigenvectors.column(c);
            v.dot(&(&a * v))
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[x].partial_cmp(&vals[y]).unwrap());
    let vecs = nalgebra::DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (order.iter().map(|&c| vals[c]).collect(), vecs)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Alias kept for callers that only need an accurate serial sum.
pub fn pairwise_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    compensated_sum(values)
}

/// `<a, b>` = sum conj(a_i) b_i.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let parts: Vec<T> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| {
            let mut s = T::default();
            for (u, v) in x.iter().zip(y) {
                s += u.conj() * *v;
            }
            s
        })
        .collect();
    let mut s = T::default();
    for p in parts {
        s += p;
    }
    s
}

pub fn norm2<T: Scalar>(a: &[T]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .map(|x| x.iter().map(|u| u.abs2()).sum::<f64>())
        .collect();
    compensated_sum(parts)
}

pub fn norm<T: Scalar>(a: &[T]) -> f64 {
    norm2(a).sqrt()
}

/// y += alpha x
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(yc, xc)| {
        for (u, v) in yc.iter_mut().zip(xc) {
            *u += alpha * *v;
        }
    });
}

pub fn scale<T: Scalar>(alpha: f64, x: &mut [T]) {
    x.par_chunks_mut(CHUNK).for_each(|c| {
        for u in c {
            *u *= alpha;
        }
    });
}

/// Deterministic seeded random vector with entries in [-1, 1).
pub fn random_vector<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| T::from_pair(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}
