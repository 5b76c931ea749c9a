use serde::Serialize;

use super::{Samples, ScatteringSolution};
use crate::geometry::norm;

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub omega_min: f64,
    pub omega_max: f64,
    pub f_min: f64,
    pub c_omega: f64,
    pub c_grad: f64,
    /// Slope of log omega against log |x| in the far field.
    pub decay_exponent: Option<f64>,
    pub expected_exponent: f64,
    pub pass: bool,
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fits the constants in omega <= C / (|x|^(d-2) + 1) and
/// |grad omega| <= C / (|x|^(d-1) + 1) on the solution's grid.
pub fn check_pointwise_bounds(sol: &ScatteringSolution) -> BoundsReport {
    let d = sol.dim as i32;
    let omega = &sol.omega;
    let omega_min = omega.iter().copied().fold(f64::INFINITY, f64::min);
    let omega_max = omega.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut c_omega: f64 = 0.0;
    let mut c_grad: f64 = 0.0;
    let mut tail = Vec::new();
    let r_in = 2.0 * sol.support_radius;
    match &sol.samples {
        Samples::Radial { radii, derivative } => {
            let r_out = radii.last().copied().unwrap_or(0.0);
            for ((&r, &w), &dw) in radii.iter().zip(omega).zip(derivative) {
                c_omega = c_omega.max(w * (r.powi(d - 2) + 1.0));
                c_grad = c_grad.max(dw.abs() * (r.powi(d - 1) + 1.0));
                if r >= r_in && r <= r_out && w > 0.0 {
                    tail.push((r.ln(), w.ln()));
                }
            }
        }
        Samples::Ball(grid) => {
            let dim = grid.dim;
            let h = grid.h;
            let coords = grid.node_coords();
            let r_out = 0.9 * grid.radius;
            let mut c = [0isize; 6];
            grid.for_each_node(|i, x| {
                let r = norm(x);
                let w = omega[i];
                c_omega = c_omega.max(w * (r.powi(d - 2) + 1.0));
                let mut g2 = 0.0;
                for a in 0..dim {
                    for k in 0..dim {
                        c[k] = coords[i][k] as isize;
                    }
                    c[a] += 1;
                    let up = grid.node_at(&c[..dim]);
                    c[a] -= 2;
                    let down = grid.node_at(&c[..dim]);
                    let g = match (up, down) {
                        (Some(u), Some(l)) => (omega[u] - omega[l]) / (2.0 * h),
                        (Some(u), None) => (omega[u] - w) / h,
                        (None, Some(l)) => (w - omega[l]) / h,
                        (None, None) => 0.0,
                    };
                    g2 += g * g;
                }
                c_grad = c_grad.max(g2.sqrt() * (r.powi(d - 1) + 1.0));
                if r >= r_in && r <= r_out && w > 0.0 {
                    tail.push((r.ln(), w.ln()));
                }
            });
        }
    }
    let decay_exponent = slope(&tail).map(|s| -s);
    let f_min = 1.0 - omega_max;
    BoundsReport {
        omega_min,
        omega_max,
        f_min,
        c_omega,
        c_grad,
        decay_exponent,
        expected_exponent: (d - 2) as f64,
        pass: f_min > 0.0 && c_omega.is_finite() && c_grad.is_finite(),
    }
}
