use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::com::sub_site;
use crate::geometry::{check_three_body_symmetry, PairPotential};
use crate::lattice::{Boundary, Lattice3};
use crate::linalg::{norm, CHUNK};
use crate::potential::PotentialSpec;
use crate::scattering::{BallGrid, Metric, ScatteringProblem};

/// Largest dense amplitude vector the sampler will allocate.
pub const MAX_AMPLITUDES: usize = 1 << 24;

#[derive(Clone, Debug)]
pub struct ManyBodyDysonOptions {
    pub trials: usize,
    pub seed: u64,
    /// Multiplies the coupling on the right-hand side.
    pub coupling_scale: f64,
    /// Coupling to use instead of the lattice b_M(W).
    pub coupling: Option<f64>,
    pub tolerance: f64,
    /// Odd number of cells across the ball used for the lattice b_M(W).
    pub scattering_cells: usize,
}

impl Default for ManyBodyDysonOptions {
    fn default() -> Self {
        Self { trials: 200, seed: 42, coupling_scale: 1.0, coupling: None, tolerance: 1e-8, scattering_cells: 13 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ManyBodyDysonReport {
    pub particles: usize,
    pub lattice_points: usize,
    pub spacing: f64,
    pub amplitudes: usize,
    /// Coupling on the right-hand side, including `coupling_scale`.
    pub coupling: f64,
    pub lattice_b_m: f64,
    pub seed: u64,
    /// <psi, LHS psi> - <psi, RHS psi> for each normalized trial.
    pub defects: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub min_defect: f64,
    pub worst_trial: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// b_M of the point samples of w on the lattice h Z^6: the modified stencil
/// on a ball grid whose nodes are lattice points.
pub fn lattice_modified_energy(w: &PotentialSpec, spacing: f64, cells: usize) -> Result<f64> {
    if w.dim != 6 {
        return Err(Error::DimensionMismatch { expected: 6, got: w.dim });
    }
    if cells % 2 == 0 {
        return Err(Error::invalid("lattice scattering grid needs an odd number of cells"));
    }
    if w.is_zero() {
        return Ok(0.0);
    }
    let grid = BallGrid::new(6, cells, cells as f64 * spacing / 2.0)?;
    if w.support_radius > grid.radius / 4.0 {
        return Err(Error::precondition(format!(
            "ball of radius {} is too small for supp w (radius {})",
            grid.radius, w.support_radius
        )));
    }
    let mut samples = vec![0.0; grid.len()];
    grid.for_each_node(|i, x| samples[i] = w.eval(x));
    let p = ScatteringProblem::from_samples(grid, Metric::Modified, samples)?;
    let max_iter = 200 * cells;
    let (omega, _) = p.solve(1e-12, max_iter)?;
    Ok(p.energy(&omega))
}

struct Configs {
    m: usize,
    sites: usize,
    count: usize,
}

impl Configs {
    #[inline]
    fn decode(&self, n: usize, out: &mut [usize; 4]) {
        let mut t = n;
        for s in out.iter_mut().take(self.m) {
            *s = t % self.sites;
            t /= self.sites;
        }
    }

    #[inline]
    fn encode(&self, s: &[usize]) -> usize {
        s.iter().rev().fold(0, |acc, &x| acc * self.sites + x)
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, m: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        for i in 0..m {
            if !prefix.contains(&i) {
                prefix.push(i);
                rec(prefix, m, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), m, &mut out);
    out
}

fn ordered_triples(m: usize) -> Vec<[usize; 3]> {
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if i != j && j != k && i != k {
                    t.push([i, j, k]);
                }
            }
        }
    }
    t
}

/// Minimum-image wrap of a coordinate difference on a ring of length `period`.
fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Per-configuration diagonal weights (1/6) sum W and (1/6) sum U prod theta_2R.
fn diagonal_weights(
    cfg: &Configs,
    lattice: &Lattice3,
    w: &PairPotential,
    u: &PairPotential,
    r: f64,
) -> (Vec<f64>, Vec<f64>) {
    let triples = ordered_triples(cfg.m);
    let h = lattice.spacing;
    let period = lattice.n as f64 * h;
    let pos: Vec<[f64; 3]> = (0..cfg.sites)
        .map(|s| {
            let c = lattice.coords(s);
            [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
        })
        .collect();
    let disp = |a: usize, b: usize| {
        let d = lattice.displacement(a, b);
        [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h]
    };
    let mut wd = vec![0.0; cfg.count];
    let mut ud = vec![0.0; cfg.count];
    wd.par_chunks_mut(CHUNK).zip(ud.par_chunks_mut(CHUNK)).enumerate().for_each(|(ci, (wc, uc))| {
        let mut s = [0usize; 4];
        for (k, (wv, uv)) in wc.iter_mut().zip(uc.iter_mut()).enumerate() {
            cfg.decode(ci * CHUNK + k, &mut s);
            let mut ws = 0.0;
            let mut us = 0.0;
            for &[i, j, kk] in &triples {
                let dij = sub_site(lattice, s[i], s[j]);
                let dik = sub_site(lattice, s[i], s[kk]);
                ws += w.at(dij, dik);
                let uval = u.at(dij, dik);
                if uval == 0.0 {
                    continue;
                }
                let a = disp(s[j], s[i]);
                let b = disp(s[kk], s[i]);
                let far = (0..cfg.m).filter(|l| ![i, j, kk].contains(l)).all(|l| {
                    let mut d2 = 0.0;
                    for c in 0..3 {
                        let centroid = pos[s[i]][c] + (a[c] + b[c]) / 3.0;
                        let t = match lattice.boundary {
                            Boundary::Periodic => wrap(centroid - pos[s[l]][c], period),
                            Boundary::Dirichlet => centroid - pos[s[l]][c],
                        };
                        d2 += t * t;
                    }
                    d2 > 4.0 * r * r
                });
                if far {
                    us += uval;
                }
            }
            *wv = ws / 6.0;
            *uv = us / 6.0;
        }
    });
    (wd, ud)
}

fn kinetic_form(cfg: &Configs, nbr: &[[Option<u32>; 3]], h: f64, psi: &[f64]) -> f64 {
    let partial: Vec<f64> = psi
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut s = [0usize; 4];
            let mut acc = 0.0;
            for (k, &p) in chunk.iter().enumerate() {
                let n = ci * CHUNK + k;
                cfg.decode(n, &mut s);
                let mut stride = 1usize;
                for &si in s.iter().take(cfg.m) {
                    for a in 0..3 {
                        let q = match nbr[si][a] {
                            Some(t) => psi[n + (t as usize) * stride - si * stride],
                            None => 0.0,
                        };
                        acc += (q - p) * (q - p);
                    }
                    stride *= cfg.sites;
                }
            }
            acc
        })
        .collect();
    partial.iter().sum::<f64>() / (h * h)
}

fn weighted(psi: &[f64], wts: &[f64]) -> f64 {
    let partial: Vec<f64> = psi
        .par_chunks(CHUNK)
        .zip(wts.par_chunks(CHUNK))
        .map(|(p, w)| p.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>())
        .collect();
    partial.iter().sum()
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Trial vector number `t`: constants, low-frequency products, pair-correlated
/// (Jastrow-like) shapes and noise, before symmetrization.
fn trial_vector(cfg: &Configs, lattice: &Lattice3, seed: u64, t: usize) -> Vec<f64> {
    let mut head = ChaCha8Rng::seed_from_u64(seed);
    head.set_stream(t as u64);
    head.set_word_pos(1u128 << 60);
    let l = lattice.n as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut modes = Vec::new();
    for _ in 0..4 {
        let k = [
            (head.next_u64() % 3) as f64 - 1.0,
            (head.next_u64() % 3) as f64 - 1.0,
            (head.next_u64() % 3) as f64 - 1.0,
        ];
        modes.push((k, 0.5 * uniform(&mut head), std::f64::consts::PI * uniform(&mut head)));
    }
    let one_body: Vec<f64> = (0..cfg.sites)
        .map(|s| {
            let c = lattice.coords(s);
            1.0 + modes
                .iter()
                .map(|(k, a, ph)| a * (two_pi * (k[0] * c[0] as f64 + k[1] * c[1] as f64 + k[2] * c[2] as f64) / l + ph).cos())
                .sum::<f64>()
        })
        .collect();
    let kind = if t == 0 { 0 } else { 1 + (t - 1) % 3 };
    let noise = match kind {
        0 => 0.0,
        1 => 0.2 * (0.5 * (1.0 + uniform(&mut head))),
        2 => 0.05 * (0.5 * (1.0 + uniform(&mut head))),
        _ => 2.0 * (0.5 * (1.0 + uniform(&mut head))),
    };
    let alpha = 0.9 * 0.5 * (1.0 + uniform(&mut head));
    let width = (0.5 + 0.75 * (1.0 + uniform(&mut head))) * lattice.spacing;
    let h = lattice.spacing;
    let mut psi = vec![0.0; cfg.count];
    psi.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        rng.set_word_pos((2 * ci * CHUNK) as u128);
        let mut s = [0usize; 4];
        for (k, out) in chunk.iter_mut().enumerate() {
            cfg.decode(ci * CHUNK + k, &mut s);
            let shape = match kind {
                0 | 3 => 1.0,
                1 => s.iter().take(cfg.m).map(|&x| one_body[x]).product(),
                _ => {
                    let mut f: f64 = s.iter().take(cfg.m).map(|&x| one_body[x]).product();
                    for i in 0..cfg.m {
                        for j in i + 1..cfg.m {
                            let d = lattice.displacement(s[i], s[j]);
                            let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64 * h * h;
                            f *= 1.0 - alpha * (-r2 / (width * width)).exp();
                        }
                    }
                    f
                }
            };
            *out = shape + noise * uniform(&mut rng);
        }
    });
    psi
}

fn symmetrize(cfg: &Configs, psi: &[f64]) -> Vec<f64> {
    let perms = permutations(cfg.m);
    let inv = 1.0 / perms.len() as f64;
    let mut out = vec![0.0; cfg.count];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let mut s = [0usize; 4];
        let mut t = [0usize; 4];
        for (k, o) in chunk.iter_mut().enumerate() {
            cfg.decode(ci * CHUNK + k, &mut s);
            let mut acc = 0.0;
            for p in &perms {
                for i in 0..cfg.m {
                    t[i] = s[p[i]];
                }
                acc += psi[cfg.encode(&t[..cfg.m])];
            }
            *o = acc * inv;
        }
    });
    out
}

/// Samples <psi, LHS psi> - <psi, RHS psi> for
/// LHS = sum_i p_i^2 + (1/6) sum_{ijk} W(x_i - x_j, x_i - x_k) and
/// RHS = (g/6) sum_{ijk} U_R(x_i - x_j, x_i - x_k) prod_l theta_2R(centroid - x_l)
/// over seeded symmetric trial vectors on an m-particle lattice.
pub fn many_body_dyson_check(
    particles: usize,
    lattice: &Lattice3,
    w: &PotentialSpec,
    u_r: &PotentialSpec,
    r: f64,
    opts: &ManyBodyDysonOptions,
) -> Result<ManyBodyDysonReport> {
    if !(particles == 3 || particles == 4) {
        return Err(Error::invalid(format!("particles must be 3 or 4, got {particles}")));
    }
    if lattice.boundary != Boundary::Periodic {
        return Err(Error::precondition("the many-body check needs a periodic lattice"));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("R must be positive"));
    }
    if opts.trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let sites = lattice.sites();
    let count = (sites as u128).pow(particles as u32);
    if count > MAX_AMPLITUDES as u128 {
        return Err(Error::TooLarge { what: "dense many-body vector".into(), estimate: count, limit: MAX_AMPLITUDES as u128 });
    }
    for (name, p) in [("w", w), ("u_r", u_r)] {
        let rep = check_three_body_symmetry(p, 1e-10)?;
        if !rep.pass {
            return Err(Error::precondition(format!("{name} is not G-invariant (defect {:.3e})", rep.max_deviation)));
        }
    }
    let cfg = Configs { m: particles, sites, count: count as usize };
    let h = lattice.spacing;
    let wp = PairPotential::from_potential(w, lattice)?;
    let mut up = PairPotential::from_potential(u_r, lattice)?;
    let mass: f64 = up.values.iter().sum::<f64>() * h.powi(6);
    if mass > 0.0 {
        up.values.iter_mut().for_each(|x| *x /= mass);
    }
    let lattice_b_m = if w.is_zero() { 0.0 } else { lattice_modified_energy(w, h, opts.scattering_cells)? };
    let coupling = opts.coupling.unwrap_or(lattice_b_m) * opts.coupling_scale;
    let (wd, ud) = diagonal_weights(&cfg, lattice, &wp, &up, r);
    let nbr: Vec<[Option<u32>; 3]> = (0..sites)
        .map(|s| [0, 1, 2].map(|a| lattice.neighbor(s, a, 1).map(|t| t as u32)))
        .collect();
    let mut defects = Vec::with_capacity(opts.trials);
    let mut kinetic = Vec::with_capacity(opts.trials);
    for t in 0..opts.trials {
        let raw = trial_vector(&cfg, lattice, opts.seed, t);
        let mut psi = symmetrize(&cfg, &raw);
        drop(raw);
        let nrm = norm(&psi);
        psi.iter_mut().for_each(|x| *x /= nrm);
        let kin = kinetic_form(&cfg, &nbr, h, &psi);
        let lhs = kin + weighted(&psi, &wd);
        let rhs = if coupling == 0.0 { 0.0 } else { coupling * weighted(&psi, &ud) };
        defects.push(lhs - rhs);
        kinetic.push(kin);
    }
    let (worst_trial, min_defect) = defects
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
    Ok(ManyBodyDysonReport {
        particles,
        lattice_points: lattice.n,
        spacing: h,
        amplitudes: cfg.count,
        coupling,
        lattice_b_m,
        seed: opts.seed,
        defects,
        kinetic,
        min_defect,
        worst_trial,
        tolerance: opts.tolerance,
        pass: min_defect >= -opts.tolerance,
    })
}
