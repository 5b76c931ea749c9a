use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{block_apply, block_mul, metric_matrix, norm, symmetry_group};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::quad::{gauss_legendre, integrate_piecewise};

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    /// (element name, max |v(x) - v(g x)| over the sample points)
    pub per_element: Vec<(String, f64)>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Seeded sample points filling the ball of radius 1.25 R0 (R0 = support radius).
pub fn symmetry_sample_points(v: &PotentialSpec, count: usize, seed: u64) -> Vec<[f64; 6]> {
    let r = if v.support_radius > 0.0 { 1.25 * v.support_radius } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(count);
    pts.push([0.0; 6]);
    while pts.len() < count {
        let mut x = [0.0; 6];
        for c in x.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let n = norm(&x);
        if n > 1.0 || n == 0.0 {
            continue;
        }
        // Radius drawn uniformly so both the core and the edge are covered.
        let t: f64 = rng.gen_range(0.0..1.0);
        for c in x.iter_mut() {
            *c *= r * t / n;
        }
        pts.push(x);
    }
    pts
}

pub fn check_three_body_symmetry(v: &PotentialSpec, tolerance: f64) -> Result<SymmetryReport> {
    if v.dim != 6 {
        return Err(Error::DimensionMismatch { expected: 6, got: v.dim });
    }
    let pts = symmetry_sample_points(v, 4000, 0x5eed);
    check_three_body_symmetry_at(v, tolerance, &pts)
}

pub fn check_three_body_symmetry_at(
    v: &PotentialSpec,
    tolerance: f64,
    points: &[[f64; 6]],
) -> Result<SymmetryReport> {
    if v.dim != 6 {
        return Err(Error::DimensionMismatch { expected: 6, got: v.dim });
    }
    let mut per_element = Vec::new();
    let mut max_dev: f64 = 0.0;
    for g in symmetry_group() {
        let mut dev: f64 = 0.0;
        for x in points {
            let d = (v.eval(x) - v.eval(&g.apply(x))).abs();
            dev = dev.max(d);
        }
        max_dev = max_dev.max(dev);
        per_element.push((g.name.to_string(), dev));
    }
    Ok(SymmetryReport {
        per_element,
        max_deviation: max_dev,
        tolerance,
        samples: points.len(),
        pass: max_dev <= tolerance,
    })
}

/// `U_R = R^-6 U(R^-1 x)` with `U = (1/6) sum_g u_tilde(M^-1 g x) det M^-1`.
pub fn symmetrize_dyson_potential(u_tilde: &PotentialSpec, r_scale: f64) -> Result<PotentialSpec> {
    if u_tilde.dim != 6 {
        return Err(Error::DimensionMismatch { expected: 6, got: u_tilde.dim });
    }
    if !u_tilde.is_radial() {
        return Err(Error::invalid("u_tilde must be a radial potential"));
    }
    if !(r_scale > 0.0) || !r_scale.is_finite() {
        return Err(Error::invalid("r_scale must be positive"));
    }
    let integral = u_tilde
        .integral()
        .ok_or_else(|| Error::invalid("u_tilde integral is not available"))?;
    if (integral - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("u_tilde must have unit integral, got {integral}")));
    }
    u_tilde
        .symmetrized_unchecked()
        .scaled(r_scale.powi(-6), 1.0 / r_scale)
}

/// Integral over S^5 in hyperspherical angles: Gauss-Legendre in the four
/// polar angles, trapezoid in the azimuth.
pub fn integrate_hyperspherical(f: impl Fn(&[f64; 6]) -> f64, n_theta: usize, n_phi: usize) -> f64 {
    let (gx, gw) = gauss_legendre(n_theta);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let angles: Vec<(f64, f64, f64)> = gx
        .iter()
        .zip(&gw)
        .map(|(x, w)| {
            let t = half_pi * (x + 1.0);
            (t.cos(), t.sin(), w * half_pi)
        })
        .collect();
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut total = 0.0;
    for a in &angles {
        for b in &angles {
            for c in &angles {
                for d in &angles {
                    let jac = a.1.powi(4) * b.1.powi(3) * c.1 * c.1 * d.1;
                    let w = a.2 * b.2 * c.2 * d.2 * jac * dphi;
                    let s1 = a.1;
                    let s2 = s1 * b.1;
                    let s3 = s2 * c.1;
                    let s4 = s3 * d.1;
                    for k in 0..n_phi {
                        let phi = k as f64 * dphi;
                        let th = [a.0, s1 * b.0, s2 * c.0, s3 * d.0, s4 * phi.cos(), s4 * phi.sin()];
                        total += w * f(&th);
                    }
                }
            }
        }
    }
    total
}

/// Integral of a symmetrized, rescaled radial profile by rays: on each ray the
/// radial integral is split at the images of the profile's breakpoints.
pub fn symmetrized_integral(u_tilde: &PotentialSpec, r_scale: f64, n_theta: usize, n_phi: usize) -> Result<f64> {
    let u = symmetrize_dyson_potential(u_tilde, r_scale)?;
    let mg = metric_matrix();
    let base_breaks = u_tilde.radial_breakpoints();
    let r_max = u.support_radius * 1.01;
    // Profiles that are nonzero at the origin start their first segment there.
    let ut_starts_at_zero = u_tilde.radial_value(0.0).map_or(true, |v| v != 0.0);
    let maps: Vec<_> = symmetry_group().iter().map(|g| block_mul(&mg.m_inverse, &g.as_block())).collect();
    Ok(integrate_hyperspherical(
        |th| {
            let mut breaks = Vec::with_capacity(maps.len() * base_breaks.len());
            for b in &maps {
                let s = norm(&block_apply(b, th));
                for r in &base_breaks {
                    breaks.push(r * r_scale / s);
                }
            }
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs());
            let lo = if ut_starts_at_zero { 0.0 } else { breaks.first().copied().unwrap_or(0.0) };
            let hi = breaks.last().copied().unwrap_or(r_max).min(r_max);
            integrate_piecewise(
                |r| {
                    let x = [r * th[0], r * th[1], r * th[2], r * th[3], r * th[4], r * th[5]];
                    r.powi(5) * u.eval(&x)
                },
                lo,
                hi,
                &breaks,
                8,
            )
        },
        n_theta,
        n_phi,
    ))
}
