//! Born approximations and Green's-function energies <v, (-Delta)^-1 v>.

use rayon::prelude::*;

use super::grid::Metric;
use crate::error::{Error, Result};
use crate::geometry::{block_apply, metric_matrix, norm};
use crate::potential::{unit_sphere_area, PotentialSpec};
use crate::quad::{gauss_legendre, integrate_piecewise};

/// First or second Born approximation: int v, or int v - int v (-2 Delta)^-1 v.
pub fn born_series(v: &PotentialSpec, order: u32) -> Result<f64> {
    match order {
        1 => first_born(v),
        2 => Ok(first_born(v)? - 0.5 * green_energy(v, Metric::Standard)?),
        _ => Err(Error::invalid(format!("Born order {order} is not supported"))),
    }
}

fn first_born(v: &PotentialSpec) -> Result<f64> {
    if v.is_zero() {
        return Ok(0.0);
    }
    if let Some(i) = v.integral() {
        return Ok(i);
    }
    let cells = default_cells(v.dim);
    let (_, vals, h) = support_cells(v, cells);
    Ok(vals.iter().sum::<f64>() * h.powi(v.dim as i32))
}

fn default_cells(dim: usize) -> usize {
    if dim == 3 {
        40
    } else {
        10
    }
}

/// Mean of |B theta|^-2 over the unit sphere of R^6 for B = M (`inverse`
/// false) or M^-1. The weight of the eigenspace x = y is Beta(3/2, 3/2).
pub fn angular_average(inverse: bool) -> f64 {
    let (lo, hi) = if inverse { (2.0 / 3.0, 2.0) } else { (1.5, 0.5) };
    // a = sin^2 t, density (8/pi) 2 sin^2 t cos^2 t dt on [0, pi/2].
    let f = |t: f64| {
        let (s, c) = (t.sin(), t.cos());
        let a = s * s;
        16.0 / std::f64::consts::PI * s * s * c * c / (lo * a + hi * (1.0 - a))
    };
    integrate_piecewise(f, 0.0, std::f64::consts::FRAC_PI_2, &[], 64)
}

/// <g, (-Delta)^-1 g> for a radial profile: |S^(d-1)| int Q(r)^2 r^(1-d) dr
/// with Q(r) = int_0^r g s^(d-1) ds; the exterior contributes Q(R)^2 R^(2-d)/(d-2).
fn radial_green(d: usize, g: impl Fn(f64) -> f64, support: f64, breaks: &[f64]) -> f64 {
    let mut knots: Vec<f64> = vec![0.0];
    knots.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < support));
    knots.push(support);
    // Refine each segment so Q can be accumulated panel by panel.
    let panels = 64;
    let (x, w) = gauss_legendre(10);
    let mut q = 0.0;
    let mut total = 0.0;
    for seg in knots.windows(2) {
        let step = (seg[1] - seg[0]) / panels as f64;
        for k in 0..panels {
            let a = seg[0] + k as f64 * step;
            // Q at a quadrature node t inside the panel is Q(a) + int_a^t.
            for (xi, wi) in x.iter().zip(&w) {
                let t = a + 0.5 * step * (xi + 1.0);
                let mut inner = 0.0;
                for (yj, wj) in x.iter().zip(&w) {
                    let s = a + 0.5 * (t - a) * (yj + 1.0);
                    inner += wj * g(s) * s.powi(d as i32 - 1);
                }
                let qt = q + 0.5 * (t - a) * inner;
                total += 0.5 * step * wi * qt * qt * t.powi(1 - d as i32);
            }
            let mut inc = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let s = a + 0.5 * step * (xi + 1.0);
                inc += wi * g(s) * s.powi(d as i32 - 1);
            }
            q += 0.5 * step * inc;
        }
    }
    total += q * q * support.powi(2 - d as i32) / (d as f64 - 2.0);
    unit_sphere_area(d) * total
}

/// <v, (-Delta)^-1 v> for the standard metric or <v, (-Delta_M)^-1 v> for
/// the modified one. Radial and |M^-1 x|-radial potentials reduce to a
/// one-dimensional integral; other potentials use `green_energy_grid`.
pub fn green_energy(v: &PotentialSpec, metric: Metric) -> Result<f64> {
    if metric == Metric::Modified && v.dim != 6 {
        return Err(Error::invalid("the modified metric needs dimension 6"));
    }
    if v.is_zero() {
        return Ok(0.0);
    }
    let d = v.dim;
    if v.is_radial() {
        let e = radial_green(d, |r| v.radial_value(r).unwrap_or(0.0), v.support_radius, &v.radial_breakpoints());
        // With V(x) = f(|x|): int |hat V|^2 / |M xi|^2 = <|M theta|^-2> int |hat V|^2 / |xi|^2.
        return Ok(match metric {
            Metric::Standard => e,
            Metric::Modified => e * angular_average(false),
        });
    }
    if v.is_metric_radial() {
        let mg = metric_matrix();
        let breaks = v.metric_radial_breakpoints();
        let rho = v.linear(mg.m)?.support_radius;
        let e = radial_green(d, |r| v.metric_radial_value(r).unwrap_or(0.0), rho, &breaks);
        // hat V(xi) = det M hat g(M xi).
        return Ok(match metric {
            Metric::Standard => mg.det_m * angular_average(true) * e,
            Metric::Modified => mg.det_m * e,
        });
    }
    green_energy_grid(v, metric, default_cells(d))
}

/// Cell centers and averages over a cube grid covering the support, with
/// `cells` cells across the support diameter.
fn support_cells(v: &PotentialSpec, cells: usize) -> (Vec<[f64; 6]>, Vec<f64>, f64) {
    let d = v.dim;
    let r0 = v.support_radius;
    let h = 2.0 * r0 / cells as f64;
    let total = cells.pow(d as u32);
    let reach = r0 + 0.5 * h * (d as f64).sqrt();
    let found: Vec<([f64; 6], f64)> = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let mut x = [0.0; 6];
            let mut rem = idx;
            for k in 0..d {
                x[k] = -r0 + ((rem % cells) as f64 + 0.5) * h;
                rem /= cells;
            }
            if norm(&x[..d]) > reach {
                return None;
            }
            let a = v.cell_average(&x[..d], h, 3);
            (a != 0.0).then_some((x, a))
        })
        .collect();
    let (pos, vals) = found.into_iter().unzip();
    (pos, vals, h)
}

/// Double sum h^(2d) sum_ij v_i v_j G(x_i - x_j) with G the Green's
/// function of -Delta (or -Delta_M). The coincident cell uses the integral
/// of G over the ball with the cell's volume.
pub fn green_energy_grid(v: &PotentialSpec, metric: Metric, cells: usize) -> Result<f64> {
    if metric == Metric::Modified && v.dim != 6 {
        return Err(Error::invalid("the modified metric needs dimension 6"));
    }
    if v.is_zero() {
        return Ok(0.0);
    }
    let d = v.dim;
    let (pos, vals, h) = support_cells(v, cells);
    let vol = h.powi(d as i32);
    let area = unit_sphere_area(d);
    let kd = 1.0 / ((d as f64 - 2.0) * area);
    let mg = metric_matrix();
    let (scale, map) = match metric {
        Metric::Standard => (1.0, None),
        Metric::Modified => (1.0 / mg.det_m, Some(mg.m_inverse)),
    };
    // Equal-volume ball radius; under M^-1 the cell volume scales by 1/det M.
    let rho_cell = (vol / crate::potential::unit_ball_volume(d)).powf(1.0 / d as f64);
    let rho = match metric {
        Metric::Standard => rho_cell,
        Metric::Modified => rho_cell * mg.det_m.powf(-1.0 / d as f64),
    };
    let self_term = rho * rho / (2.0 * (d as f64 - 2.0));
    let rows: Vec<f64> = (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = vals[i] * self_term / vol;
            let mut z = [0.0; 6];
            for j in 0..pos.len() {
                if j == i {
                    continue;
                }
                for k in 0..d {
                    z[k] = pos[i][k] - pos[j][k];
                }
                let r = match &map {
                    None => norm(&z[..d]),
                    Some(b) => norm(&block_apply(b, &z[..d])),
                };
                acc += vals[j] * kd * scale / r.powi(d as i32 - 2);
            }
            vals[i] * acc
        })
        .collect();
    Ok(crate::linalg::compensated_sum(rows) * vol * vol)
}
