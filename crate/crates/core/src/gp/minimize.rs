use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::onebody::OneBody;
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, dot, norm2, CHUNK};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub points: usize,
    pub half_width: f64,
    pub spacing: f64,
}

impl GridMeta {
    pub fn of(op: &OneBody) -> Self {
        GridMeta { points: op.lattice.n, half_width: op.half_width, spacing: op.spacing() }
    }
}

/// A normalized minimizer of E(u) = <u, h u> + coupling int |u|^6.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GPState {
    #[serde(skip)]
    pub u: Vec<Complex64>,
    pub e_gp: f64,
    pub eps0: f64,
    pub el_residual: f64,
    /// Norm of the projected gradient at exit.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub coupling: f64,
    pub seed: u64,
    pub grid: GridMeta,
    /// Energy after each accepted step.
    #[serde(skip)]
    pub energy_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GpOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub start: Option<Vec<Complex64>>,
}

impl GpOptions {
    pub fn new(tol: f64, seed: u64) -> Self {
        GpOptions { tol, seed, max_iter: 50_000, start: None }
    }
}

fn check_normalized(u: &[Complex64], op: &OneBody) -> Result<()> {
    if u.len() != op.sites() {
        return Err(Error::DimensionMismatch { expected: op.sites(), got: u.len() });
    }
    let n = op.cell_volume() * norm2(u);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::precondition(format!("u is not normalized: ||u||^2 = {n}")));
    }
    Ok(())
}

fn check_coupling(coupling: f64) -> Result<()> {
    if !(coupling >= 0.0) || !coupling.is_finite() {
        return Err(Error::precondition(format!("coupling must be >= 0, got {coupling}")));
    }
    Ok(())
}

fn chunked_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum::<f64>())
        .collect();
    compensated_sum(parts)
}

fn re_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    dot(a, b).re
}

/// int |u|^6 on the grid.
pub fn sextic_integral(u: &[Complex64], op: &OneBody) -> f64 {
    op.cell_volume() * chunked_sum(u.len(), |i| u[i].norm_sqr().powi(3))
}

fn apply(op: &OneBody, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::default(); x.len()];
    op.apply(x, &mut y);
    y
}

/// <u, h u> for a normalized grid function.
pub fn one_body_energy(u: &[Complex64], op: &OneBody) -> Result<f64> {
    check_normalized(u, op)?;
    Ok(op.cell_volume() * re_dot(u, &apply(op, u)))
}

/// The discrete functional `<u, h u> + coupling int |u|^6`.
pub fn gp_energy(u: &[Complex64], op: &OneBody, coupling: f64) -> Result<f64> {
    check_normalized(u, op)?;
    check_coupling(coupling)?;
    let w = op.cell_volume();
    Ok(w * re_dot(u, &apply(op, u)) + coupling * sextic_integral(u, op))
}

/// `h u + 3 coupling |u|^4 u` given `h u`.
fn nonlinear(coupling: f64, u: &[Complex64], hu: &[Complex64]) -> Vec<Complex64> {
    hu.par_iter().zip(u.par_iter()).map(|(a, b)| a + b * (3.0 * coupling * b.norm_sqr().powi(2))).collect()
}

/// Riemannian gradient `2 (H u - <u, H u> u)` on the unit sphere, H u = h u + 3 coupling |u|^4 u.
pub fn gp_gradient(u: &[Complex64], op: &OneBody, coupling: f64) -> Result<Vec<Complex64>> {
    check_normalized(u, op)?;
    check_coupling(coupling)?;
    let hu = nonlinear(coupling, u, &apply(op, u));
    let lambda = op.cell_volume() * re_dot(u, &hu);
    Ok(hu.par_iter().zip(u.par_iter()).map(|(a, b)| (a - b * lambda) * 2.0).collect())
}

/// `||(h + 3 coupling |u|^4 - eps0) u||` with eps0 the Rayleigh multiplier.
pub fn el_residual(state: &GPState, op: &OneBody) -> Result<f64> {
    let g = gp_gradient(&state.u, op, state.coupling)?;
    Ok(0.5 * (op.cell_volume() * norm2(&g)).sqrt())
}

fn seeded_start(op: &OneBody, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
    let mut u: Vec<Complex64> = op
        .v_ext
        .iter()
        .map(|v| {
            let env = (-(v - 1.0) / 4.0).exp();
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            phase * env * (Complex64::new(1.0, 0.0) + z * 0.3)
        })
        .collect();
    normalize(&mut u, op.cell_volume());
    u
}

fn normalize(u: &mut [Complex64], w: f64) {
    let s = 1.0 / (w * norm2(u)).sqrt();
    u.par_iter_mut().for_each(|z| *z *= s);
}

/// Energy change from u to (u + t d) / ||u + t d||, evaluated without
/// cancellation against the total energy.
#[allow(clippy::too_many_arguments)]
fn energy_change(
    w: f64,
    coupling: f64,
    u: &[Complex64],
    d: &[Complex64],
    t: f64,
    quad: [f64; 3],
    nu: f64,
    r: f64,
    nd: f64,
) -> f64 {
    let [a, b, c] = quad;
    let big_delta = 2.0 * t * r + t * t * nd;
    let nv = nu + big_delta;
    let dq = ((2.0 * t * b + t * t * c) * nu - a * big_delta) / (nv * nu);
    if coupling == 0.0 {
        return dq;
    }
    let ds = chunked_sum(u.len(), |i| {
        let pu2 = u[i].norm_sqr();
        let delta = 2.0 * t * (u[i].conj() * d[i]).re + t * t * d[i].norm_sqr();
        let pu = pu2 / nu;
        let pv = (pu2 + delta) / nv;
        let diff = (delta * nu - pu2 * big_delta) / (nv * nu);
        diff * (pv * pv + pv * pu + pu * pu)
    });
    dq + coupling * w * ds
}

/// Riemannian nonlinear conjugate gradients (Polak-Ribiere+) on the unit
/// sphere with projection retraction and Armijo backtracking by halving.
/// The trial step minimizes the Rayleigh quotient of `h + coupling |u|^4`
/// along the search direction.
pub fn minimize_gp(op: &OneBody, coupling: f64, tol: f64, seed: u64) -> Result<GPState> {
    minimize_gp_with(op, coupling, &GpOptions::new(tol, seed))
}

pub fn minimize_gp_with(op: &OneBody, coupling: f64, opts: &GpOptions) -> Result<GPState> {
    check_coupling(coupling)?;
    if !(opts.tol > 0.0) {
        return Err(Error::precondition(format!("tol must be positive, got {}", opts.tol)));
    }
    let w = op.cell_volume();
    let n = op.sites();
    let mut u = match &opts.start {
        Some(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            let mut s = s.clone();
            normalize(&mut s, w);
            s
        }
        None => seeded_start(op, opts.seed),
    };
    let mut hu = apply(op, &u);
    let mut energy = w * re_dot(&u, &hu) + coupling * sextic_integral(&u, op);
    let mut history = vec![energy];
    let mut d: Vec<Complex64> = Vec::new();
    let mut g_old: Vec<Complex64> = Vec::new();
    let mut g_old_norm2 = 0.0;
    let mut iterations = 0;
    let mut since_refresh = 0;
    loop {
        let big_h = nonlinear(coupling, &u, &hu);
        let lambda = w * re_dot(&u, &big_h);
        let g: Vec<Complex64> = big_h.par_iter().zip(u.par_iter()).map(|(a, b)| a - b * lambda).collect();
        let g_norm2 = w * norm2(&g);
        let grad_norm = 2.0 * g_norm2.sqrt();
        if grad_norm <= opts.tol {
            if since_refresh == 0 {
                break;
            }
            // Confirm with a freshly applied h u before stopping.
            hu = apply(op, &u);
            since_refresh = 0;
            continue;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                what: format!("GP minimization (last energies {:?})", tail(&history)),
                residual: grad_norm,
                iterations,
            });
        }
        iterations += 1;

        // Search direction.
        let mut fresh = d.is_empty();
        if !fresh {
            let r_d = w * re_dot(&u, &d);
            let r_g = w * re_dot(&u, &g_old);
            let gg: f64 = w * (re_dot(&g, &g) - re_dot(&g, &g_old) + r_g * re_dot(&g, &u));
            let beta = (gg / g_old_norm2).max(0.0);
            d.par_iter_mut().zip(g.par_iter()).zip(u.par_iter()).for_each(|((di, gi), ui)| {
                *di = -gi + (*di - ui * r_d) * beta;
            });
            if w * re_dot(&g, &d) >= 0.0 {
                fresh = true;
            }
        }
        if fresh {
            d = g.par_iter().map(|x| -x).collect();
        }
        // Exact tangency.
        let r0 = w * re_dot(&u, &d);
        d.par_iter_mut().zip(u.par_iter()).for_each(|(di, ui)| *di -= ui * r0);

        let hd = apply(op, &d);
        let nu = w * norm2(&u);
        let r = w * re_dot(&u, &d);
        let nd = w * norm2(&d);
        let a = w * re_dot(&u, &hu);
        let b = w * re_dot(&u, &hd);
        let c = w * re_dot(&d, &hd);
        let slope = 2.0 * w * re_dot(&g, &d);

        // Rayleigh minimizer of h + coupling |u|^4 along d.
        let (an, bn, cn) = if coupling > 0.0 {
            let ea = chunked_sum(n, |i| u[i].norm_sqr().powi(3));
            let eb = chunked_sum(n, |i| u[i].norm_sqr().powi(2) * (u[i].conj() * d[i]).re);
            let ec = chunked_sum(n, |i| u[i].norm_sqr().powi(2) * d[i].norm_sqr());
            (a + coupling * w * ea, b + coupling * w * eb, c + coupling * w * ec)
        } else {
            (a, b, c)
        };
        let q = cn - an * nd;
        let mut t = if bn < 0.0 && nd > 0.0 {
            (q - (q * q + 4.0 * bn * bn * nd).sqrt()) / (2.0 * bn * nd)
        } else {
            f64::NAN
        };
        if !(t.is_finite() && t > 0.0) {
            t = 1.0 / (op.diagonal.iter().cloned().fold(0.0, f64::max));
        }
        let phi = |t: f64| energy_change(w, coupling, &u, &d, t, [a, b, c], nu, r, nd);
        let mut f = phi(t);
        if coupling > 0.0 {
            // Quadratic interpolation of the exact energy from phi(0) = 0, phi'(0) = slope.
            for _ in 0..4 {
                let denom = 2.0 * (f - slope * t);
                let tq = -slope * t * t / denom;
                if !(denom > 0.0 && tq.is_finite() && tq > 0.0) {
                    break;
                }
                let fq = phi(tq);
                if !(fq < f) {
                    break;
                }
                let settled = (tq - t).abs() <= 1e-3 * t;
                t = tq;
                f = fq;
                if settled {
                    break;
                }
            }
        }
        let mut accepted = None;
        for _ in 0..80 {
            if f <= 1e-4 * t * slope {
                accepted = Some(f);
                break;
            }
            t *= 0.5;
            f = phi(t);
        }
        let Some(de) = accepted else {
            return Err(Error::NonConvergence {
                what: format!("GP line search underflow (last energies {:?})", tail(&history)),
                residual: grad_norm,
                iterations,
            });
        };
        assert!(de <= 0.0, "accepted step raised the energy by {de}");
        let nv = nu + 2.0 * t * r + t * t * nd;
        let s = 1.0 / nv.sqrt();
        u.par_iter_mut().zip(d.par_iter()).for_each(|(ui, di)| *ui = (*ui + di * t) * s);
        hu.par_iter_mut().zip(hd.par_iter()).for_each(|(hi, di)| *hi = (*hi + di * t) * s);
        energy += de;
        history.push(energy);
        since_refresh += 1;
        if since_refresh >= 100 {
            normalize(&mut u, w);
            hu = apply(op, &u);
            since_refresh = 0;
        }
        g_old = g;
        g_old_norm2 = g_norm2;
    }
    finish(op, coupling, u, iterations, opts.seed, history)
}

fn tail(h: &[f64]) -> &[f64] {
    &h[h.len().saturating_sub(5)..]
}

fn finish(
    op: &OneBody,
    coupling: f64,
    mut u: Vec<Complex64>,
    iterations: usize,
    seed: u64,
    energy_history: Vec<f64>,
) -> Result<GPState> {
    let w = op.cell_volume();
    normalize(&mut u, w);
    let hu = apply(op, &u);
    let kinetic = w * re_dot(&u, &hu);
    let six = sextic_integral(&u, op);
    let e_gp = kinetic + coupling * six;
    let eps0 = kinetic + 3.0 * coupling * six;
    let g = gp_gradient(&u, op, coupling)?;
    let gradient_norm = (w * norm2(&g)).sqrt();
    let mut state = GPState {
        u,
        e_gp,
        eps0,
        el_residual: 0.0,
        gradient_norm,
        iterations,
        coupling,
        seed,
        grid: GridMeta::of(op),
        energy_history,
    };
    state.el_residual = el_residual(&state, op)?;
    Ok(state)
}

/// Minimum of `<u, h u> + (v_hat_0 / 6) int |u|^6`: the GP problem with the
/// first Born coupling in place of b_M(V).
pub fn mean_field_energy(op: &OneBody, v_hat_0: f64, tol: f64, seed: u64) -> Result<GPState> {
    if !(v_hat_0 >= 0.0) {
        return Err(Error::precondition(format!("v_hat_0 must be >= 0, got {v_hat_0}")));
    }
    minimize_gp(op, v_hat_0 / 6.0, tol, seed)
}
