//! Zero-energy scattering in R^3 and R^6.
//!
//! The scattering energy is b(v) = inf over omega of
//! int 2|grad omega|^2 + v |1 - omega|^2, attained at omega = (-2 Delta + v)^-1 v.
//! The modified energy b_M replaces |grad omega|^2 by |M grad omega|^2.

mod born;
mod bounds;
pub mod grid;
pub mod radial;

pub use born::{angular_average, born_series, green_energy, green_energy_grid};
pub use bounds::{check_pointwise_bounds, BoundsReport};
pub use grid::{sample_potential, BallGrid, Closure, Metric, ScatteringOperator};
pub use radial::{radial_profile, RadialProfile};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{check_three_body_symmetry, metric_matrix};
use crate::linalg::{compensated_sum, conjugate_gradient};
use crate::potential::PotentialSpec;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayConstants {
    /// Smallest C with omega <= C / (|x|^(d-2) + 1) on the grid.
    pub c_omega: f64,
    /// Smallest C with |grad omega| <= C / (|x|^(d-1) + 1) on the grid.
    pub c_grad: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridInfo {
    pub dim: usize,
    pub cells: usize,
    pub spacing: f64,
    pub domain_radius: f64,
    pub unknowns: usize,
}

/// Where the entries of `ScatteringSolution::omega` live.
#[derive(Clone, Debug)]
pub enum Samples {
    Ball(BallGrid),
    /// Radii of a radial profile, with d omega / dr alongside.
    Radial { radii: Vec<f64>, derivative: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct ScatteringSolution {
    pub dim: usize,
    pub metric: Metric,
    pub omega: Vec<f64>,
    pub samples: Samples,
    pub b: f64,
    /// Energy on the primary grid before the domain correction.
    pub b_grid: f64,
    /// Discrete functional evaluated at omega.
    pub functional: f64,
    /// Relative defect ||(K + V) omega - v|| / ||v||.
    pub residual: f64,
    pub iterations: usize,
    pub decay_constants: DecayConstants,
    pub f_min: f64,
    pub support_radius: f64,
    pub grid: GridInfo,
    pub domain_radii_used: Vec<f64>,
    pub extrapolated: bool,
}

#[derive(Clone, Debug)]
pub struct ScatteringOptions {
    /// Cells per axis across the domain diameter. Must be even when extrapolating.
    pub cells: usize,
    /// Midpoint samples per axis for the cell averages of v.
    pub subsamples: usize,
    pub metric: Metric,
    pub extrapolate: bool,
    /// Assumed decay order p of the domain bias, b(L) - b(inf) ~ L^-p.
    pub domain_order: f64,
    /// CG iterations allowed per cell across the domain.
    pub iterations_per_cell: usize,
}

impl ScatteringOptions {
    pub fn for_dim(dim: usize) -> Self {
        if dim == 6 {
            Self {
                cells: 14,
                subsamples: 6,
                metric: Metric::Standard,
                extrapolate: true,
                domain_order: 4.0,
                iterations_per_cell: 20,
            }
        } else {
            Self {
                cells: 128,
                subsamples: 6,
                metric: Metric::Standard,
                extrapolate: true,
                domain_order: 1.0,
                iterations_per_cell: 20,
            }
        }
    }
}

struct Discrete {
    grid: BallGrid,
    omega: Vec<f64>,
    b: f64,
    functional: f64,
    residual: f64,
    iterations: usize,
}

/// A discretized scattering problem on one ball grid.
pub struct ScatteringProblem {
    pub grid: BallGrid,
    pub metric: Metric,
    pub potential: Vec<f64>,
}

impl ScatteringProblem {
    pub fn new(v: &PotentialSpec, metric: Metric, cells: usize, radius: f64, subsamples: usize) -> Result<Self> {
        let grid = BallGrid::new(v.dim, cells, radius)?;
        let potential = sample_potential(v, &grid, subsamples);
        if let Some(bad) = potential.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(format!("potential takes the inadmissible sample {bad}")));
        }
        Ok(Self { grid, metric, potential })
    }

    /// Problem with given nodal potential values (for example point samples).
    pub fn from_samples(grid: BallGrid, metric: Metric, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: potential.len() });
        }
        if let Some(bad) = potential.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid(format!("potential takes the inadmissible sample {bad}")));
        }
        Ok(Self { grid, metric, potential })
    }

    pub fn operator(&self) -> Result<ScatteringOperator<'_>> {
        ScatteringOperator::new(&self.grid, self.metric, self.potential.clone())
    }

    fn volume(&self) -> f64 {
        self.grid.h.powi(self.grid.dim as i32)
    }

    /// h^d (omega.K omega + sum v (1 - omega)^2).
    pub fn functional(&self, op: &ScatteringOperator, omega: &[f64]) -> f64 {
        let pot = compensated_sum(self.potential.iter().zip(omega).map(|(v, w)| v * (1.0 - w) * (1.0 - w)));
        op.kinetic_energy(omega) + pot * self.volume()
    }

    /// h^d sum v (1 - omega).
    pub fn energy(&self, omega: &[f64]) -> f64 {
        compensated_sum(self.potential.iter().zip(omega).map(|(v, w)| v * (1.0 - w))) * self.volume()
    }

    /// Solve (K + V) omega = v by Jacobi-preconditioned CG.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<(Vec<f64>, crate::linalg::CgReport)> {
        let op = self.operator()?;
        let mut omega = vec![0.0; self.grid.len()];
        let rep = conjugate_gradient(|x, y| op.apply(x, y), &self.potential, &mut omega, Some(op.diagonal()), tol, max_iter)?;
        Ok((omega, rep))
    }

    fn run(self, tol: f64, max_iter: usize) -> Result<Discrete> {
        let (omega, rep) = self.solve(tol, max_iter)?;
        let op = self.operator()?;
        let functional = self.functional(&op, &omega);
        let b = self.energy(&omega);
        Ok(Discrete { grid: self.grid, omega, b, functional, residual: rep.relative_residual, iterations: rep.iterations })
    }
}

fn validate(v: &PotentialSpec, domain_radius: f64, tol: f64) -> Result<()> {
    if !v.nonnegative {
        return Err(Error::invalid("potential takes negative values"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !(domain_radius >= 4.0 * v.support_radius) || !domain_radius.is_finite() {
        return Err(Error::precondition(format!(
            "domain radius {domain_radius} is below 4 R0 = {}",
            4.0 * v.support_radius
        )));
    }
    Ok(())
}

/// Full grid solve with the default options for the dimension of v.
pub fn solve_scattering(v: &PotentialSpec, domain_radius: f64, tol: f64) -> Result<ScatteringSolution> {
    solve_scattering_with(v, domain_radius, tol, &ScatteringOptions::for_dim(v.dim))
}

pub fn solve_scattering_with(
    v: &PotentialSpec,
    domain_radius: f64,
    tol: f64,
    opts: &ScatteringOptions,
) -> Result<ScatteringSolution> {
    validate(v, domain_radius, tol)?;
    if opts.extrapolate && opts.cells % 2 != 0 {
        return Err(Error::invalid("extrapolation needs an even cell count"));
    }
    let max_iter = opts.iterations_per_cell * opts.cells;
    let fine = ScatteringProblem::new(v, opts.metric, opts.cells, domain_radius, opts.subsamples)?.run(tol, max_iter)?;
    let mut b = fine.b;
    let mut radii = vec![domain_radius];
    if opts.extrapolate && !v.is_zero() {
        let half = opts.cells / 2;
        // Cell-centered grids of odd and even size sit on shifted lattices,
        // so the far grid keeps the parity of the near one at the same spacing.
        let far_cells = opts.cells + half % 2;
        let far_radius = domain_radius * far_cells as f64 / half as f64;
        let near = ScatteringProblem::new(v, opts.metric, half, domain_radius, opts.subsamples)?.run(tol, max_iter)?;
        let far =
            ScatteringProblem::new(v, opts.metric, far_cells, far_radius, opts.subsamples)?.run(tol, max_iter)?;
        let w = (far_radius / domain_radius).powf(opts.domain_order);
        b += (far.b - near.b) * w / (w - 1.0);
        radii.push(far_radius);
    }
    let grid = GridInfo {
        dim: v.dim,
        cells: opts.cells,
        spacing: fine.grid.h,
        domain_radius,
        unknowns: fine.grid.len(),
    };
    let f_min = fine.omega.iter().map(|w| 1.0 - w).fold(1.0, f64::min);
    let mut sol = ScatteringSolution {
        dim: v.dim,
        metric: opts.metric,
        omega: fine.omega,
        samples: Samples::Ball(fine.grid),
        b,
        b_grid: fine.b,
        functional: fine.functional,
        residual: fine.residual,
        iterations: fine.iterations,
        decay_constants: DecayConstants { c_omega: 0.0, c_grad: 0.0 },
        f_min,
        support_radius: v.support_radius,
        grid,
        extrapolated: radii.len() > 1,
        domain_radii_used: radii,
    };
    let rep = check_pointwise_bounds(&sol);
    sol.decay_constants = DecayConstants { c_omega: rep.c_omega, c_grad: rep.c_grad };
    Ok(sol)
}

/// Radial shooting solution for a radial potential in d = 3 (d = 6 is also accepted).
pub fn solve_scattering_radial(v: &PotentialSpec, r_max: f64, tol: f64) -> Result<ScatteringSolution> {
    if !(r_max > v.support_radius) {
        return Err(Error::invalid(format!(
            "r_max = {r_max} must exceed the support radius {}",
            v.support_radius
        )));
    }
    let p = radial_profile(v, r_max, tol)?;
    let f_min = p.omega.iter().map(|w| 1.0 - w).fold(1.0, f64::min);
    let mut sol = ScatteringSolution {
        dim: v.dim,
        metric: Metric::Standard,
        grid: GridInfo { dim: v.dim, cells: p.radii.len(), spacing: 1.0 / p.steps.max(1) as f64, domain_radius: r_max, unknowns: p.radii.len() },
        omega: p.omega,
        samples: Samples::Radial { radii: p.radii, derivative: p.omega_prime },
        b: p.b,
        b_grid: p.b,
        functional: p.b,
        residual: 0.0,
        iterations: p.steps,
        decay_constants: DecayConstants { c_omega: 0.0, c_grad: 0.0 },
        f_min,
        support_radius: v.support_radius,
        domain_radii_used: vec![r_max],
        extrapolated: false,
    };
    let rep = check_pointwise_bounds(&sol);
    sol.decay_constants = DecayConstants { c_omega: rep.c_omega, c_grad: rep.c_grad };
    Ok(sol)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModifiedEnergy {
    /// det M * b(V(M .)).
    pub b_m: f64,
    /// Direct discretization of -2 div(M^2 grad).
    pub cross_check: f64,
    pub relative_difference: f64,
}

/// b_M(V) by the change of variables and, independently, by the direct
/// anisotropic stencil.
pub fn scattering_energy_modified(v6: &PotentialSpec, domain_radius: f64, tol: f64) -> Result<(f64, f64)> {
    let r = scattering_energy_modified_with(v6, domain_radius, tol, &ScatteringOptions::for_dim(6))?;
    Ok((r.b_m, r.cross_check))
}

pub fn scattering_energy_modified_with(
    v6: &PotentialSpec,
    domain_radius: f64,
    tol: f64,
    opts: &ScatteringOptions,
) -> Result<ModifiedEnergy> {
    if v6.dim != 6 {
        return Err(Error::DimensionMismatch { expected: 6, got: v6.dim });
    }
    let sym = check_three_body_symmetry(v6, 1e-10)?;
    if !sym.pass {
        let detail: Vec<String> = sym.per_element.iter().map(|(g, d)| format!("{g}: {d:.3e}")).collect();
        return Err(Error::precondition(format!("potential is not G-invariant ({})", detail.join(", "))));
    }
    validate(v6, domain_radius, tol)?;
    if v6.is_zero() {
        return Ok(ModifiedEnergy { b_m: 0.0, cross_check: 0.0, relative_difference: 0.0 });
    }
    let b_cv = modified_energy_change_of_variables(v6, domain_radius, tol, opts)?;
    let mod_opts = ScatteringOptions { metric: Metric::Modified, ..opts.clone() };
    let b_direct = solve_scattering_with(v6, domain_radius, tol, &mod_opts)?.b;
    Ok(ModifiedEnergy {
        b_m: b_cv,
        cross_check: b_direct,
        relative_difference: (b_cv - b_direct).abs() / b_cv.abs().max(f64::MIN_POSITIVE),
    })
}

/// det M * b(V(M .)) with the standard solver. The y domain has the same
/// size relative to the support of V(M .) as `domain_radius` has relative to
/// the support of V, and the same number of cells.
pub fn modified_energy_change_of_variables(
    v6: &PotentialSpec,
    domain_radius: f64,
    tol: f64,
    opts: &ScatteringOptions,
) -> Result<f64> {
    if v6.dim != 6 {
        return Err(Error::DimensionMismatch { expected: 6, got: v6.dim });
    }
    validate(v6, domain_radius, tol)?;
    let mg = metric_matrix();
    if v6.is_zero() {
        return Ok(0.0);
    }
    let w = v6.linear(mg.m)?;
    let ratio = w.support_radius / v6.support_radius;
    let std_opts = ScatteringOptions { metric: Metric::Standard, ..opts.clone() };
    Ok(solve_scattering_with(&w, domain_radius * ratio, tol, &std_opts)?.b * mg.det_m)
}

/// Interaction scaling. In R^6: N^(6 beta - 2) v(N^beta x). In R^3 the
/// two-body convention N^2 w(N x) is used and `beta` is ignored.
pub fn scale_potential(v: &PotentialSpec, n: u64, beta: f64) -> Result<PotentialSpec> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if v.dim == 6 && !(beta > 0.0 && beta <= 0.5) {
        return Err(Error::precondition(format!("beta = {beta} is outside (0, 1/2]")));
    }
    if n == 1 {
        return Ok(v.clone());
    }
    let nf = n as f64;
    if v.dim == 3 {
        v.scaled(nf * nf, nf)
    } else {
        v.scaled(nf.powf(6.0 * beta - 2.0), nf.powf(beta))
    }
}

/// b_M of a potential of the form g(|M^-1 x|), by radial shooting in y = M^-1 x.
pub fn modified_energy_radial(v6: &PotentialSpec, tol: f64) -> Result<f64> {
    if !v6.is_metric_radial() {
        return Err(Error::precondition("potential is not a function of |M^-1 x|"));
    }
    let mg = metric_matrix();
    let w = v6.linear(mg.m)?;
    Ok(radial_profile(&w, 2.0 * w.support_radius, tol)?.b * mg.det_m)
}

#[cfg(test)]
mod tests;
