use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::symmetry_group;
use crate::potential::PotentialSpec;
use crate::quad::gauss_legendre;

/// Lattice weights of a three-body potential on `h Z^3`.
///
/// `W(d1, d2) = h^-6 int int V(y, z) phi(y/h - d1) phi(z/h - d2) dy dz` with
/// `phi` the trilinear hat, averaged over the six relabelings so that
/// `W(x1 - x2, x1 - x3)` does not depend on the particle order. For a
/// multilinear density this gives `sum p_x p_y p_z W(x - y, x - z)` equal to
/// the continuum triple integral, and `h^6 sum W = int V`.
#[derive(Clone, Debug, Serialize)]
pub struct ThreeBodyWeights {
    pub spacing: f64,
    /// Largest |component| of a displacement with nonzero weight.
    pub reach: i64,
    pub entries: Vec<([i64; 3], [i64; 3], f64)>,
    #[serde(skip)]
    map: HashMap<[i64; 6], f64>,
}

impl ThreeBodyWeights {
    pub fn zero(spacing: f64) -> Self {
        ThreeBodyWeights { spacing, reach: 0, entries: Vec::new(), map: HashMap::new() }
    }

    pub fn hat_averaged(v: &PotentialSpec, spacing: f64) -> Result<Self> {
        if v.dim != 6 {
            return Err(Error::DimensionMismatch { expected: 6, got: v.dim });
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("lattice spacing must be positive"));
        }
        if v.is_zero() {
            return Ok(Self::zero(spacing));
        }
        let h = spacing;
        let r = v.support_radius;
        let s = ((3.0 * h / r).ceil() as usize).max(1);
        let delta = h / s as f64;
        let k_lo = (-r / delta).floor() as i64;
        let k_hi = (r / delta).ceil() as i64;
        let (gx, gw) = gauss_legendre(2);

        // Subcells of the 3D displacement space, with their quadrature points
        // as (position, weight, fractional offset inside the lattice cell).
        struct Sub {
            base: [i64; 3],
            min_r2: f64,
            pts: Vec<([f64; 3], f64, [f64; 3])>,
        }
        let mut subs = Vec::new();
        for a in k_lo..k_hi {
            for b in k_lo..k_hi {
                for c in k_lo..k_hi {
                    let k = [a, b, c];
                    let mut min_r2 = 0.0;
                    for &ki in &k {
                        let lo = ki as f64 * delta;
                        let hi = lo + delta;
                        let dist = if lo > 0.0 { lo } else if hi < 0.0 { -hi } else { 0.0 };
                        min_r2 += dist * dist;
                    }
                    if min_r2 >= r * r {
                        continue;
                    }
                    let base = [k[0].div_euclid(s as i64), k[1].div_euclid(s as i64), k[2].div_euclid(s as i64)];
                    let mut pts = Vec::with_capacity(8);
                    for i in 0..2 {
                        for j in 0..2 {
                            for l in 0..2 {
                                let idx = [i, j, l];
                                let mut p = [0.0; 3];
                                let mut f = [0.0; 3];
                                let mut wt = 1.0;
                                for ax in 0..3 {
                                    p[ax] = (k[ax] as f64 + 0.5 + 0.5 * gx[idx[ax]]) * delta;
                                    f[ax] = p[ax] / h - base[ax] as f64;
                                    wt *= 0.5 * gw[idx[ax]] * delta;
                                }
                                pts.push((p, wt, f));
                            }
                        }
                    }
                    subs.push(Sub { base, min_r2, pts });
                }
            }
        }

        let corner = |f: &[f64; 3], c: usize| -> f64 {
            let mut w = 1.0;
            for ax in 0..3 {
                w *= if (c >> ax) & 1 == 1 { f[ax] } else { 1.0 - f[ax] };
            }
            w
        };
        // Subcells sharing a lattice base are summed together, and the groups
        // are merged in base order, so the sums do not depend on the thread count.
        let mut by_base: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        for (i, sy) in subs.iter().enumerate() {
            by_base.entry(sy.base).or_default().push(i);
        }
        let groups: Vec<Vec<usize>> = by_base.into_values().collect();
        let group_sum = |group: &Vec<usize>| {
            let mut acc: HashMap<[i64; 6], f64> = HashMap::new();
            let mut local = [0.0f64; 64];
            for &iy in group {
                let sy = &subs[iy];
                for sz in &subs {
                    if sy.min_r2 + sz.min_r2 >= r * r {
                        continue;
                    }
                    local.iter_mut().for_each(|x| *x = 0.0);
                    let mut any = false;
                    for (py, wy, fy) in &sy.pts {
                        for (pz, wz, fz) in &sz.pts {
                            let val = v.eval(&[py[0], py[1], py[2], pz[0], pz[1], pz[2]]);
                            if val == 0.0 {
                                continue;
                            }
                            any = true;
                            let q = val * wy * wz;
                            for cy in 0..8 {
                                let qy = q * corner(fy, cy);
                                for cz in 0..8 {
                                    local[cy * 8 + cz] += qy * corner(fz, cz);
                                }
                            }
                        }
                    }
                    if !any {
                        continue;
                    }
                    for cy in 0..8 {
                        for cz in 0..8 {
                            let val = local[cy * 8 + cz];
                            if val == 0.0 {
                                continue;
                            }
                            let key = [
                                sy.base[0] + (cy & 1) as i64,
                                sy.base[1] + ((cy >> 1) & 1) as i64,
                                sy.base[2] + ((cy >> 2) & 1) as i64,
                                sz.base[0] + (cz & 1) as i64,
                                sz.base[1] + ((cz >> 1) & 1) as i64,
                                sz.base[2] + ((cz >> 2) & 1) as i64,
                            ];
                            *acc.entry(key).or_insert(0.0) += val;
                        }
                    }
                }
            }
            acc
        };
        let mut raw: BTreeMap<[i64; 6], f64> = BTreeMap::new();
        for batch in groups.chunks(32) {
            let parts: Vec<HashMap<[i64; 6], f64>> = batch.par_iter().map(group_sum).collect();
            for part in parts {
                for (k, v) in part {
                    *raw.entry(k).or_insert(0.0) += v;
                }
            }
        }
        let h6 = h.powi(6);
        raw.values_mut().for_each(|v| *v /= h6);
        Ok(Self::symmetrized(raw, spacing))
    }

    /// Weights given directly by point samples `V(h d1, h d2)`.
    pub fn point_sampled(v: &PotentialSpec, spacing: f64) -> Result<Self> {
        if v.dim != 6 {
            return Err(Error::DimensionMismatch { expected: 6, got: v.dim });
        }
        let reach = (v.support_radius / spacing).floor() as i64;
        let mut raw = BTreeMap::new();
        let range: Vec<i64> = (-reach..=reach).collect();
        for &a in &range {
            for &b in &range {
                for &c in &range {
                    for &d in &range {
                        for &e in &range {
                            for &f in &range {
                                let key = [a, b, c, d, e, f];
                                let x: Vec<f64> = key.iter().map(|&k| k as f64 * spacing).collect();
                                let val = v.eval(&x);
                                if val != 0.0 {
                                    raw.insert(key, val);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Self::symmetrized(raw, spacing))
    }

    fn symmetrized(raw: BTreeMap<[i64; 6], f64>, spacing: f64) -> Self {
        let group = symmetry_group();
        let mut sym: BTreeMap<[i64; 6], f64> = BTreeMap::new();
        for (k, val) in &raw {
            for g in &group {
                let m = g.matrix;
                let mut img = [0i64; 6];
                for ax in 0..3 {
                    img[ax] = m[0][0] * k[ax] + m[0][1] * k[3 + ax];
                    img[3 + ax] = m[1][0] * k[ax] + m[1][1] * k[3 + ax];
                }
                *sym.entry(img).or_insert(0.0) += val / 6.0;
            }
        }
        let entries: Vec<([i64; 3], [i64; 3], f64)> =
            sym.iter().map(|(k, &v)| ([k[0], k[1], k[2]], [k[3], k[4], k[5]], v)).collect();
        let map: HashMap<[i64; 6], f64> = sym.into_iter().collect();
        let reach = entries
            .iter()
            .flat_map(|(a, b, _)| a.iter().chain(b.iter()).map(|x| x.abs()).collect::<Vec<_>>())
            .max()
            .unwrap_or(0);
        ThreeBodyWeights { spacing, reach, entries, map }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, d1: [i64; 3], d2: [i64; 3]) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let r = self.reach;
        if d1.iter().chain(d2.iter()).any(|x| x.abs() > r) {
            return 0.0;
        }
        self.map.get(&[d1[0], d1[1], d1[2], d2[0], d2[1], d2[2]]).copied().unwrap_or(0.0)
    }

    /// `h^6 sum W`, the lattice value of `int V`.
    pub fn total(&self) -> f64 {
        self.spacing.powi(6) * self.entries.iter().map(|e| e.2).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_to_the_potential_and_are_symmetric() {
        let v = PotentialSpec::gaussian6d(5.0, 1.0, 1.0).unwrap();
        let exact = v.integral().unwrap();
        let w = ThreeBodyWeights::hat_averaged(&v, 0.4).unwrap();
        assert!((w.total() - exact).abs() < 2e-3 * exact, "{} vs {exact}", w.total());
        for (a, b, val) in w.entries.iter().take(200) {
            let swapped = w.get(*b, *a);
            let neg_a = [-a[0], -a[1], -a[2]];
            let shifted = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            assert!((swapped - val).abs() < 1e-14 * val.abs().max(1.0));
            assert!((w.get(neg_a, shifted) - val).abs() < 1e-14 * val.abs().max(1.0));
        }
    }
}
