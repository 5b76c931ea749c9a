//! Shooting solver for radial potentials.
//!
//! With f = 1 - omega and p = r^(d-1) f', the zero-energy equation reads
//! f' = p / r^(d-1), p' = r^(d-1) v f / 2. Outside the support
//! f = beta (1 - c r^(2-d)), and b = 2 (d-2) |S^(d-1)| c.

use crate::error::{Error, Result};
use crate::potential::{unit_sphere_area, PotentialSpec};

#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub dim: usize,
    /// Far-field coefficient c in omega ~ c / r^(d-2); the scattering length in d = 3.
    pub coefficient: f64,
    pub b: f64,
    pub radii: Vec<f64>,
    /// omega = 1 - f at `radii`, normalized so that f -> 1 at infinity.
    pub omega: Vec<f64>,
    /// d omega / dr at `radii`.
    pub omega_prime: Vec<f64>,
    pub steps: usize,
}

fn rhs(v: &dyn Fn(f64) -> f64, d: usize, r: f64, f: f64, p: f64) -> (f64, f64) {
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let w = r.powi(d as i32 - 1);
    (p / w, 0.5 * w * v(r) * f)
}

struct Shot {
    coefficient: f64,
    radii: Vec<f64>,
    f: Vec<f64>,
    p: Vec<f64>,
    beta: f64,
}

fn shoot(v: &dyn Fn(f64) -> f64, d: usize, breaks: &[f64], r_max: f64, per_unit: usize) -> Shot {
    let mut knots = vec![0.0];
    knots.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < r_max));
    knots.push(r_max);
    let (mut f, mut p) = (1.0, 0.0);
    let mut radii = vec![0.0];
    let mut fs = vec![f];
    let mut ps = vec![p];
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let steps = ((b - a) * per_unit as f64).ceil().max(4.0) as usize;
        let h = (b - a) / steps as f64;
        for s in 0..steps {
            let r = a + s as f64 * h;
            // Sample strictly inside the segment so jumps at the knots are not straddled.
            let r_mid = r + 0.5 * h;
            let r_end = if s + 1 == steps { b - 1e-14 * b.max(1.0) } else { r + h };
            let r_beg = if s == 0 { a + 1e-14 * a.max(1.0) } else { r };
            let k1 = rhs(v, d, r_beg, f, p);
            let k2 = rhs(v, d, r_mid, f + 0.5 * h * k1.0, p + 0.5 * h * k1.1);
            let k3 = rhs(v, d, r_mid, f + 0.5 * h * k2.0, p + 0.5 * h * k2.1);
            let k4 = rhs(v, d, r_end, f + h * k3.0, p + h * k3.1);
            f += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            radii.push(a + (s + 1) as f64 * h);
            fs.push(f);
            ps.push(p);
        }
    }
    let bc = p / (d as f64 - 2.0);
    let beta = f + bc * r_max.powi(2 - d as i32);
    Shot { coefficient: bc / beta, radii, f: fs, p: ps, beta }
}

/// Far-field coefficient and energy of a radial potential by RK4 shooting,
/// refining the step until successive coefficients agree to `tol`.
pub fn radial_profile(v: &PotentialSpec, r_max: f64, tol: f64) -> Result<RadialProfile> {
    let d = v.dim;
    if !v.is_radial() {
        return Err(Error::precondition("the radial solver needs a radial potential"));
    }
    if !(r_max > v.support_radius) {
        return Err(Error::invalid(format!(
            "r_max = {r_max} must exceed the support radius {}",
            v.support_radius
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let area = unit_sphere_area(d);
    if v.is_zero() {
        return Ok(RadialProfile {
            dim: d,
            coefficient: 0.0,
            b: 0.0,
            radii: vec![0.0, r_max],
            omega: vec![0.0, 0.0],
            omega_prime: vec![0.0, 0.0],
            steps: 0,
        });
    }
    let prof = |r: f64| v.radial_value(r).unwrap_or(0.0);
    let breaks = v.radial_breakpoints();
    // Integrate only through the support; the exterior is exact.
    let r_end = v.support_radius;
    let scale = v.sup_norm.sqrt().max(1.0 / r_end);
    let mut per_unit = ((32.0 * scale).ceil() as usize).max(64);
    let mut prev = shoot(&prof, d, &breaks, r_end, per_unit);
    for _ in 0..16 {
        per_unit *= 2;
        let next = shoot(&prof, d, &breaks, r_end, per_unit);
        let change = (next.coefficient - prev.coefficient).abs();
        prev = next;
        if change <= tol * prev.coefficient.abs().max(1e-300) {
            let c = prev.coefficient;
            // Append exterior points for the tail of the profile.
            let mut radii = prev.radii.clone();
            let mut omega: Vec<f64> = prev.f.iter().map(|f| 1.0 - f / prev.beta).collect();
            let mut prime: Vec<f64> = prev
                .radii
                .iter()
                .zip(&prev.p)
                .map(|(&r, &p)| if r == 0.0 { 0.0 } else { -p / prev.beta / r.powi(d as i32 - 1) })
                .collect();
            let n_out = 64;
            for k in 1..=n_out {
                let r = r_end + (r_max - r_end) * k as f64 / n_out as f64;
                radii.push(r);
                omega.push(c * r.powi(2 - d as i32));
                prime.push(-(d as f64 - 2.0) * c * r.powi(1 - d as i32));
            }
            return Ok(RadialProfile {
                dim: d,
                coefficient: c,
                b: 2.0 * (d as f64 - 2.0) * area * c,
                radii,
                omega,
                omega_prime: prime,
                steps: per_unit,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "radial shooting".into(),
        residual: f64::NAN,
        iterations: per_unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_well_closed_form() {
        for (v0, r) in [(50.0, 1.0), (2.0, 1.5), (1e4, 1.0)] {
            let v = PotentialSpec::square_well(3, v0, r).unwrap();
            let p = radial_profile(&v, 4.0 * r, 1e-12).unwrap();
            let k = (v0 / 2.0f64).sqrt();
            let a = r - (k * r).tanh() / k;
            assert!((p.coefficient - a).abs() < 1e-9 * a, "{v0}: {} vs {a}", p.coefficient);
            assert!((p.b - 8.0 * std::f64::consts::PI * a).abs() < 1e-8 * p.b);
        }
    }

    fn bessel_i(n: i32, z: f64) -> f64 {
        let mut term = (z / 2.0).powi(n) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for m in 1..200 {
            term *= (z / 2.0).powi(2) / (m as f64 * (m + n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn six_dimensional_square_well() {
        // Inside, f is proportional to I_2(k r) / r^2; matching f'/f = k I_3 / I_2
        // at R gives c = L R^5 / (4 + L R).
        for (v0, r) in [(3.0, 1.0), (40.0, 0.7)] {
            let v = PotentialSpec::square_well(6, v0, r).unwrap();
            let p = radial_profile(&v, 3.0, 1e-12).unwrap();
            let k = (v0 / 2.0f64).sqrt();
            let l = k * bessel_i(3, k * r) / bessel_i(2, k * r);
            let c = l * r.powi(5) / (4.0 + l * r);
            assert!((p.coefficient - c).abs() < 1e-9 * c, "{} vs {c}", p.coefficient);
            let int = v0 * crate::potential::unit_ball_volume(6) * r.powi(6);
            assert!(p.b < int);
        }
    }
}
