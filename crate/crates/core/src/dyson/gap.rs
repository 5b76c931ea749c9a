use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::check_three_body_symmetry;
use crate::linalg::{lanczos_lowest, symmetric_eigenvalues, LanczosOptions};
use crate::potential::PotentialSpec;
use crate::quad::integrate_piecewise;
use crate::scattering::{
    modified_energy_radial, radial_profile, sample_potential, scattering_energy_modified, solve_scattering,
    BallGrid, Closure, Metric, ScatteringOperator,
};

const BISECTION_STEPS: usize = 40;
const LANCZOS_TOL: f64 = 1e-9;
const BOUNDARY_EIGENVALUE: f64 = 1e-7;

/// Discretization of the Dyson form on the kinetic window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DysonGrid {
    /// Radial nodes r_i = i R2 / cells: P1 stiffness with lumped dual-cell
    /// masses. Needs radial v and u and the standard metric.
    Radial { cells: usize },
    /// Cell-centered ball grid with `cells` across the window diameter and
    /// natural boundary conditions on the window.
    Cartesian { cells: usize },
}

impl DysonGrid {
    pub fn cells(&self) -> usize {
        match *self {
            DysonGrid::Radial { cells } | DysonGrid::Cartesian { cells } => cells,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DysonParams {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DysonReport {
    pub params: DysonParams,
    pub grid: DysonGrid,
    pub metric: Metric,
    pub unknowns: usize,
    /// Largest c with the discrete form nonnegative.
    pub c_star: f64,
    /// b(v), or b_M(v) for the modified metric.
    pub b: f64,
    pub ratio: Option<f64>,
    /// (1 - ratio) R1 / R0.
    pub fitted_kappa: Option<f64>,
    pub bracket: [f64; 2],
    /// Lowest eigenvalue at the two bracket ends, in units of max u.
    pub eigenvalues: [f64; 2],
    pub bisection_steps: usize,
    pub matvecs: usize,
}

/// Operator family T(c) = D^-1/2 (A - c B) D^-1/2 / max(u).
trait Pencil {
    fn len(&self) -> usize;
    /// Rayleigh quotient of the constant function: an upper bound for c*.
    fn upper_coupling(&self) -> f64;
    /// Lowest eigenvalue of T(c) and its eigenvector.
    fn lowest(&self, c: f64, start: Option<&[f64]>) -> Result<(f64, Vec<f64>, usize)>;
}

struct RadialPencil {
    diag_kin: Vec<f64>,
    off: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
    upper: f64,
}

impl RadialPencil {
    fn new(v: &PotentialSpec, u: &PotentialSpec, r2: f64, cells: usize) -> Result<Self> {
        if !v.is_radial() || !u.is_radial() {
            return Err(Error::precondition("the radial Dyson grid needs radial v and u"));
        }
        let d = v.dim as i32;
        let h = r2 / cells as f64;
        let n = cells + 1;
        let r = |i: usize| i as f64 * h;
        let mut breaks = v.radial_breakpoints();
        breaks.extend(u.radial_breakpoints());
        let mut mass = vec![0.0; n];
        let mut vbar = vec![0.0; n];
        let mut ubar = vec![0.0; n];
        for i in 0..n {
            let a = (r(i) - h / 2.0).max(0.0);
            let b = (r(i) + h / 2.0).min(r2);
            mass[i] = (b.powi(d) - a.powi(d)) / d as f64;
            let weight = |s: f64| s.powi(d - 1);
            vbar[i] = integrate_piecewise(|s| v.radial_value(s).unwrap_or(0.0) * weight(s), a, b, &breaks, 8) / mass[i];
            ubar[i] = integrate_piecewise(|s| u.radial_value(s).unwrap_or(0.0) * weight(s), a, b, &breaks, 8) / mass[i];
        }
        let w: Vec<f64> = (0..cells).map(|i| 2.0 * (r(i + 1).powi(d) - r(i).powi(d)) / (d as f64 * h * h)).collect();
        let umax = ubar.iter().cloned().fold(0.0, f64::max);
        if !(umax > 0.0) {
            return Err(Error::precondition("u vanishes on the grid"));
        }
        let mut diag_kin = vec![0.0; n];
        for i in 0..cells {
            diag_kin[i] += w[i];
            diag_kin[i + 1] += w[i];
        }
        let diag_kin = diag_kin.iter().zip(&mass).map(|(k, m)| k / (m * umax)).collect();
        let off = (0..cells).map(|i| -w[i] / ((mass[i] * mass[i + 1]).sqrt() * umax)).collect();
        let upper = vbar.iter().zip(&mass).map(|(a, m)| a * m).sum::<f64>()
            / ubar.iter().zip(&mass).map(|(a, m)| a * m).sum::<f64>();
        Ok(Self {
            diag_kin,
            off,
            v: vbar.iter().map(|x| x / umax).collect(),
            u: ubar.iter().map(|x| x / umax).collect(),
            upper,
        })
    }

    fn diag(&self, c: f64) -> Vec<f64> {
        self.diag_kin.iter().zip(&self.v).zip(&self.u).map(|((k, v), u)| k + v - c * u).collect()
    }

    fn dense(&self, c: f64) -> DMatrix<f64> {
        let n = self.len();
        let diag = self.diag(c);
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if j == i + 1 {
                self.off[i]
            } else if i == j + 1 {
                self.off[j]
            } else {
                0.0
            }
        })
    }
}

impl Pencil for RadialPencil {
    fn len(&self) -> usize {
        self.diag_kin.len()
    }

    fn upper_coupling(&self) -> f64 {
        self.upper
    }

    fn lowest(&self, c: f64, start: Option<&[f64]>) -> Result<(f64, Vec<f64>, usize)> {
        // Shift-invert below the spectrum: T(c) >= -c because u <= max u.
        let sigma = -c - 1e-3 * (1.0 + c);
        let n = self.len();
        let diag: Vec<f64> = self.diag(c).iter().map(|x| x - sigma).collect();
        let mut piv = vec![0.0; n];
        piv[0] = diag[0];
        for i in 1..n {
            piv[i] = diag[i] - self.off[i - 1] * self.off[i - 1] / piv[i - 1];
        }
        if piv.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::NonConvergence { what: "shifted factorization".into(), residual: f64::NAN, iterations: 0 });
        }
        let solve = |x: &[f64], y: &mut [f64]| {
            y[0] = x[0];
            for i in 1..n {
                y[i] = x[i] - self.off[i - 1] / piv[i - 1] * y[i - 1];
            }
            y[n - 1] /= piv[n - 1];
            for i in (0..n - 1).rev() {
                y[i] = (y[i] - self.off[i] * y[i + 1]) / piv[i];
            }
            y.iter_mut().for_each(|t| *t = -*t);
        };
        let opts = LanczosOptions { tol: LANCZOS_TOL, ..Default::default() };
        let eig = lanczos_lowest(n, solve, start, &opts)?;
        let mu = eig.values[0];
        Ok((sigma - 1.0 / mu, eig.vectors.into_iter().next().unwrap(), eig.matvecs))
    }
}

struct CartesianPencil {
    grid: BallGrid,
    metric: Metric,
    v: Vec<f64>,
    u: Vec<f64>,
    umax: f64,
}

impl CartesianPencil {
    fn new(v: &PotentialSpec, u: &PotentialSpec, window: f64, cells: usize, metric: Metric) -> Result<Self> {
        let grid = BallGrid::new(v.dim, cells, window)?;
        let sub = if v.dim == 3 { 4 } else { 2 };
        let vs = sample_potential(v, &grid, sub);
        let us = sample_potential(u, &grid, sub);
        let umax = us.iter().cloned().fold(0.0, f64::max);
        if !(umax > 0.0) {
            return Err(Error::precondition("u vanishes on the grid"));
        }
        Ok(Self { grid, metric, v: vs, u: us, umax })
    }
}

impl Pencil for CartesianPencil {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn upper_coupling(&self) -> f64 {
        self.v.iter().sum::<f64>() / self.u.iter().sum::<f64>()
    }

    fn lowest(&self, c: f64, start: Option<&[f64]>) -> Result<(f64, Vec<f64>, usize)> {
        let op = ScatteringOperator::with_closure(&self.grid, self.metric, self.v.clone(), Closure::Neumann)?;
        let s = 1.0 / self.umax;
        let apply = |x: &[f64], y: &mut [f64]| {
            op.apply(x, y);
            for i in 0..x.len() {
                y[i] = (y[i] - c * self.u[i] * x[i]) * s;
            }
        };
        let norm_est = 2.0 * op.diagonal().iter().cloned().fold(0.0, f64::max) * s;
        let opts = LanczosOptions { tol: LANCZOS_TOL, abs_tol: 1e-12 * norm_est, ..Default::default() };
        let eig = lanczos_lowest(self.len(), apply, start, &opts)?;
        Ok((eig.values[0], eig.vectors.into_iter().next().unwrap(), eig.matvecs))
    }
}

fn bisect(p: &dyn Pencil) -> Result<(f64, [f64; 2], [f64; 2], usize, usize)> {
    let mut hi = p.upper_coupling();
    if !(hi > 0.0) || !hi.is_finite() {
        return Ok((0.0, [0.0, 0.0], [0.0, 0.0], 0, 0));
    }
    let mut lo = 0.0;
    let mut matvecs = 0;
    let mut start: Option<Vec<f64>> = None;
    let mut steps = 0;
    while steps < BISECTION_STEPS {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let (lam, vec, mv) = p.lowest(mid, start.as_deref())?;
        matvecs += mv;
        start = Some(vec);
        if lam.abs() <= BOUNDARY_EIGENVALUE {
            let half = 0.5 * (hi - lo);
            lo = mid - half.min(mid);
            hi = mid + half;
            let (la, _, m2) = p.lowest(lo, start.as_deref())?;
            let (lb, _, m3) = p.lowest(hi, start.as_deref())?;
            return Ok((mid, [lo, hi], [la, lb], steps, matvecs + m2 + m3));
        }
        if lam > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (la, _, m2) = p.lowest(lo, start.as_deref())?;
    let (lb, _, m3) = p.lowest(hi, start.as_deref())?;
    Ok((0.5 * (lo + hi), [lo, hi], [la, lb], steps, matvecs + m2 + m3))
}

fn check_inputs(v: &PotentialSpec, u: &PotentialSpec, params: &DysonParams, metric: Metric) -> Result<()> {
    if v.dim != u.dim {
        return Err(Error::DimensionMismatch { expected: v.dim, got: u.dim });
    }
    let DysonParams { r0, r1, r2 } = *params;
    if ![r0, r1, r2].iter().all(|x| x.is_finite() && *x > 0.0) {
        return Err(Error::invalid("R0, R1, R2 must be positive and finite"));
    }
    if !(r1 > r0) {
        return Err(Error::precondition(format!("R1 = {r1} must exceed R0 = {r0}")));
    }
    if !(r2 >= r1) {
        return Err(Error::precondition(format!("R2 = {r2} must be at least R1 = {r1}")));
    }
    let slack = 1.0 + 1e-12;
    if v.support_radius > r0 * slack {
        return Err(Error::precondition(format!(
            "supp v reaches radius {} beyond R0 = {r0}",
            v.support_radius
        )));
    }
    let total = u.integral().ok_or_else(|| Error::invalid("the integral of u is not available"))?;
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::precondition(format!("u must have unit integral, got {total}")));
    }
    let (inner, outer) = match metric {
        Metric::Standard => {
            if !u.is_radial() {
                return Err(Error::precondition("u must be radial for the standard metric"));
            }
            (r1, r2)
        }
        Metric::Modified => {
            if v.dim != 6 {
                return Err(Error::DimensionMismatch { expected: 6, got: v.dim });
            }
            for (name, p, tol) in [("v", v, 1e-10), ("u", u, 1e-12)] {
                let rep = check_three_body_symmetry(p, tol)?;
                if !rep.pass {
                    return Err(Error::precondition(format!(
                        "{name} is not G-invariant (defect {:.3e})",
                        rep.max_deviation
                    )));
                }
            }
            // Range of |x| on which |M^-1 x| in [R1, R2] is possible.
            (r1 / 2f64.sqrt(), (1.5f64).sqrt() * r2)
        }
    };
    if u.support_radius > outer * slack {
        return Err(Error::precondition(format!(
            "supp u reaches radius {} beyond {outer}",
            u.support_radius
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = u.dim;
    for k in 0..4096 {
        let mut x = [0.0; 6];
        for xi in x.iter_mut().take(d) {
            *xi = rng.gen_range(-1.0..1.0);
        }
        let n = x[..d].iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-300);
        let rad = inner * (k as f64 + 0.5) / 4096.0;
        for xi in x.iter_mut().take(d) {
            *xi *= rad / n;
        }
        if u.eval(&x[..d]) > 1e-14 {
            return Err(Error::precondition(format!("u is nonzero at radius {rad} inside {inner}")));
        }
    }
    Ok(())
}

fn energy_of(v: &PotentialSpec, metric: Metric, params: &DysonParams) -> Result<f64> {
    if v.is_zero() {
        return Ok(0.0);
    }
    match metric {
        Metric::Standard if v.is_radial() => Ok(radial_profile(v, 2.0 * v.support_radius, 1e-10)?.b),
        Metric::Standard => Ok(solve_scattering(v, 4.0 * params.r0.max(v.support_radius), 1e-8)?.b),
        Metric::Modified if v.is_metric_radial() => modified_energy_radial(v, 1e-10),
        Metric::Modified => Ok(scattering_energy_modified(v, 4.0 * params.r0.max(v.support_radius), 1e-8)?.0),
    }
}

/// Largest coupling c with -2 div 1_window grad + v - c u >= 0 on the grid.
/// The window is |x| <= R2, or |x| <= sqrt(2) R2 with the M-metric kinetic
/// form for `Metric::Modified`.
pub fn dyson_gap(
    v: &PotentialSpec,
    u: &PotentialSpec,
    params: DysonParams,
    grid: DysonGrid,
    metric: Metric,
) -> Result<DysonReport> {
    check_inputs(v, u, &params, metric)?;
    if grid.cells() < 2 {
        return Err(Error::invalid("the Dyson grid needs at least 2 cells"));
    }
    let pencil: Box<dyn Pencil> = match (grid, metric) {
        (DysonGrid::Radial { cells }, Metric::Standard) => Box::new(RadialPencil::new(v, u, params.r2, cells)?),
        (DysonGrid::Radial { .. }, Metric::Modified) => {
            return Err(Error::invalid("the radial Dyson grid supports the standard metric only"))
        }
        (DysonGrid::Cartesian { cells }, Metric::Standard) => {
            Box::new(CartesianPencil::new(v, u, params.r2, cells, metric)?)
        }
        (DysonGrid::Cartesian { cells }, Metric::Modified) => {
            Box::new(CartesianPencil::new(v, u, 2f64.sqrt() * params.r2, cells, metric)?)
        }
    };
    let (c_star, bracket, eigenvalues, steps, matvecs) = bisect(pencil.as_ref())?;
    let b = energy_of(v, metric, &params)?;
    let ratio = (b > 0.0).then(|| c_star / b);
    Ok(DysonReport {
        params,
        grid,
        metric,
        unknowns: pencil.len(),
        c_star,
        b,
        ratio,
        fitted_kappa: ratio.map(|q| (1.0 - q) * params.r1 / params.r0),
        bracket,
        eigenvalues,
        bisection_steps: steps,
        matvecs,
    })
}

/// c* of the radial discretization from a dense generalized eigenproblem:
/// c* = 1 / lambda_max(L^-1 B L^-T) with A = L L^T.
pub fn dyson_gap_dense(v: &PotentialSpec, u: &PotentialSpec, params: DysonParams, cells: usize) -> Result<f64> {
    check_inputs(v, u, &params, Metric::Standard)?;
    if cells > 4000 {
        return Err(Error::TooLarge { what: "dense Dyson oracle".into(), estimate: cells as u128, limit: 4000 });
    }
    let p = RadialPencil::new(v, u, params.r2, cells)?;
    if v.is_zero() {
        return Ok(0.0);
    }
    let a = p.dense(0.0);
    let chol = a.cholesky().ok_or_else(|| Error::precondition("the Dyson form is not positive at c = 0"))?;
    let bhalf = DMatrix::from_diagonal(&DVector::from_vec(p.u.iter().map(|x| x.sqrt()).collect()));
    let y = chol.l().solve_lower_triangular(&bhalf).ok_or_else(|| Error::precondition("singular factor"))?;
    let c = &y * y.transpose();
    let vals = symmetric_eigenvalues(c);
    let lmax = vals[vals.len() - 1];
    Ok(1.0 / lmax)
}

#[derive(Clone, Debug, Serialize)]
pub struct DysonSweep {
    pub reports: Vec<DysonReport>,
    pub ratios: Vec<f64>,
    pub kappas: Vec<f64>,
    pub monotone_increasing: bool,
    pub max_ratio: f64,
    /// (max - min) / |mean| of the fitted kappas.
    pub kappa_spread: f64,
}

/// Radial gaps for R1 = factor R0 and R2 = r2_over_r1 R1, at a fixed node
/// spacing `h`.
pub fn dyson_sweep(
    v: &PotentialSpec,
    u_for: impl Fn(f64, f64) -> Result<PotentialSpec>,
    r0: f64,
    factors: &[f64],
    r2_over_r1: f64,
    h: f64,
) -> Result<DysonSweep> {
    let mut reports = Vec::new();
    for &f in factors {
        let r1 = f * r0;
        let r2 = r2_over_r1 * r1;
        let u = u_for(r1, r2)?;
        let cells = (r2 / h).round().max(2.0) as usize;
        reports.push(dyson_gap(v, &u, DysonParams { r0, r1, r2 }, DysonGrid::Radial { cells }, Metric::Standard)?);
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio.unwrap_or(f64::NAN)).collect();
    let kappas: Vec<f64> = reports.iter().map(|r| r.fitted_kappa.unwrap_or(f64::NAN)).collect();
    let monotone_increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let max_ratio = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let mean = kappas.iter().sum::<f64>() / kappas.len() as f64;
    let spread = kappas.iter().cloned().fold(f64::MIN, f64::max) - kappas.iter().cloned().fold(f64::MAX, f64::min);
    Ok(DysonSweep { reports, ratios, kappas, monotone_increasing, max_ratio, kappa_spread: spread / mean.abs() })
}

