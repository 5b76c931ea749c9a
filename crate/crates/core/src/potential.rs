//! Potential descriptors and their compiled evaluators.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    block_apply, block_det, block_inverse, block_min_singular, invariant_quadratic, metric_matrix,
    symmetry_group, Block,
};
use crate::gridfile;
use crate::quad::gauss_legendre;

/// JSON-serializable description of a potential. Composite kinds nest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Descriptor {
    Zero {
        dim: usize,
    },
    /// `v0` on the closed ball of the given radius.
    SquareWell {
        dim: usize,
        v0: f64,
        radius: f64,
    },
    /// Indicator of `r1 <= |x| <= r2`, normalized to unit integral.
    RadialAnnulusIndicator {
        dim: usize,
        r1: f64,
        r2: f64,
    },
    /// Radial profile through the given samples (monotone cubic), zero past the last radius.
    RadialTable {
        dim: usize,
        radii: Vec<f64>,
        values: Vec<f64>,
    },
    /// `amplitude * max(0, exp(-q/width^2) - exp(-cutoff^2/width^2))` with
    /// the G-invariant form `q = |x|^2 + |y|^2 - x.y`.
    Gaussian6d {
        amplitude: f64,
        width: f64,
        cutoff: f64,
    },
    /// `(xx |x|^2 + yy |y|^2 + xy x.y)` on `|(x,y)| <= radius`; not symmetric in general.
    BlockQuadratic {
        xx: f64,
        yy: f64,
        xy: f64,
        radius: f64,
    },
    /// `amplitude * inner(length_scale * x)`.
    Scaled {
        amplitude: f64,
        length_scale: f64,
        inner: Box<Descriptor>,
    },
    /// `inner(B x)` for a 2x2 block matrix B acting on R^3 (+) R^3.
    BlockLinear {
        matrix: Block,
        inner: Box<Descriptor>,
    },
    /// `(1/6) sum_g inner(M^-1 g x) det M^-1`.
    Symmetrized {
        inner: Box<Descriptor>,
    },
    /// Samples on the centered grid `x_i = (i - (n-1)/2) * spacing`, multilinear in between.
    Grid {
        dim: usize,
        n: usize,
        spacing: f64,
        data_file: String,
    },
}

#[derive(Debug)]
pub struct GridSamples {
    pub dim: usize,
    pub n: usize,
    pub spacing: f64,
    pub data: Vec<f64>,
}

impl GridSamples {
    fn eval(&self, x: &[f64]) -> f64 {
        let half = (self.n as f64 - 1.0) / 2.0;
        let mut base = [0usize; 6];
        let mut frac = [0.0f64; 6];
        for k in 0..self.dim {
            let t = x[k] / self.spacing + half;
            if t < 0.0 || t > self.n as f64 - 1.0 {
                return 0.0;
            }
            let i = (t.floor() as usize).min(self.n.saturating_sub(2));
            base[k] = i;
            frac[k] = t - i as f64;
        }
        if self.n == 1 {
            return self.data[0];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = 0usize;
            let mut stride = 1usize;
            for k in 0..self.dim {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx += (base[k] + bit) * stride;
                stride *= self.n;
            }
            if w != 0.0 {
                acc += w * self.data[idx];
            }
        }
        acc
    }

    fn support_radius(&self) -> f64 {
        let half = (self.n as f64 - 1.0) / 2.0;
        let mut r2max: f64 = 0.0;
        let mut any = false;
        for (idx, &v) in self.data.iter().enumerate() {
            if v != 0.0 {
                any = true;
                let mut rem = idx;
                let mut r2 = 0.0;
                for _ in 0..self.dim {
                    let c = (rem % self.n) as f64 - half;
                    rem /= self.n;
                    r2 += c * c;
                }
                r2max = r2max.max(r2);
            }
        }
        if !any {
            return 0.0;
        }
        (r2max.sqrt() + (self.dim as f64).sqrt()) * self.spacing
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::invalid("radial table needs at least two (radius, value) pairs"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x[0] < 0.0 {
            return Err(Error::invalid("radial table radii must be nonnegative and strictly increasing"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        d[n - 1] = end_slope(
            h[n - 2],
            if n > 2 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n > 2 { delta[n - 3] } else { delta[n - 2] },
        );
        Ok(Pchip { x, y, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t > self.x[n - 1] {
            return 0.0;
        }
        let i = match self.x.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn max_value(&self) -> f64 {
        self.y.iter().cloned().fold(0.0, f64::max)
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[derive(Clone, Debug)]
enum Node {
    Zero,
    Ball { height: f64, r2: f64 },
    Shell { height: f64, r1sq: f64, r2sq: f64 },
    Table(Arc<Pchip>),
    Gauss { amplitude: f64, inv_w2: f64, floor: f64, cutoff: f64 },
    BlockQuad { xx: f64, yy: f64, xy: f64, r2: f64 },
    Scaled { amplitude: f64, scale: f64, inner: Box<Node> },
    Linear { matrix: Block, inner: Box<Node> },
    Symmetrized { maps: Vec<Block>, det_inv: f64, inner: Box<Node> },
    Grid(Arc<GridSamples>),
}

impl Node {
    fn eval(&self, dim: usize, x: &[f64]) -> f64 {
        match self {
            Node::Zero => 0.0,
            Node::Ball { height, r2 } => {
                if sq(x) <= *r2 {
                    *height
                } else {
                    0.0
                }
            }
            Node::Shell { height, r1sq, r2sq } => {
                let s = sq(x);
                if s >= *r1sq && s <= *r2sq {
                    *height
                } else {
                    0.0
                }
            }
            Node::Table(p) => p.eval(sq(x).sqrt()),
            Node::Gauss { amplitude, inv_w2, floor, .. } => {
                let e = (-invariant_quadratic(x) * inv_w2).exp() - floor;
                if e > 0.0 {
                    amplitude * e
                } else {
                    0.0
                }
            }
            Node::BlockQuad { xx, yy, xy, r2 } => {
                if sq(x) > *r2 {
                    return 0.0;
                }
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for k in 0..3 {
                    a += x[k] * x[k];
                    b += x[k + 3] * x[k + 3];
                    c += x[k] * x[k + 3];
                }
                xx * a + yy * b + xy * c
            }
            Node::Scaled { amplitude, scale, inner } => {
                let mut y = [0.0; 6];
                for k in 0..dim {
                    y[k] = x[k] * scale;
                }
                amplitude * inner.eval(dim, &y[..dim])
            }
            Node::Linear { matrix, inner } => inner.eval(dim, &block_apply(matrix, x)),
            Node::Symmetrized { maps, det_inv, inner } => {
                let mut acc = 0.0;
                for b in maps {
                    acc += inner.eval(dim, &block_apply(b, x));
                }
                acc * det_inv / 6.0
            }
            Node::Grid(g) => g.eval(x),
        }
    }

    fn radial(&self, r: f64) -> Option<f64> {
        match self {
            Node::Zero => Some(0.0),
            Node::Ball { height, r2 } => Some(if r * r <= *r2 { *height } else { 0.0 }),
            Node::Shell { height, r1sq, r2sq } => {
                let s = r * r;
                Some(if s >= *r1sq && s <= *r2sq { *height } else { 0.0 })
            }
            Node::Table(p) => Some(p.eval(r)),
            Node::Scaled { amplitude, scale, inner } => inner.radial(r * scale).map(|v| amplitude * v),
            Node::Linear { matrix, inner } => {
                // |M^-1 B y| = |y| when M^-1 B is orthogonal.
                let c = crate::geometry::block_mul(&metric_matrix().m_inverse, matrix);
                let ctc = crate::geometry::block_mul(&crate::geometry::block_transpose(&c), &c);
                if crate::geometry::block_max_diff(&ctc, &IDENTITY_BLOCK) < 1e-12 {
                    inner.metric_radial(r)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// g(rho) when the node has the form x -> g(|M^-1 x|).
    fn metric_radial(&self, rho: f64) -> Option<f64> {
        match self {
            Node::Zero => Some(0.0),
            Node::Gauss { amplitude, inv_w2, floor, .. } => {
                Some(amplitude * ((-0.75 * rho * rho * inv_w2).exp() - floor).max(0.0))
            }
            Node::Symmetrized { det_inv, inner, .. } => inner.radial(rho).map(|v| det_inv * v),
            Node::Scaled { amplitude, scale, inner } => inner.metric_radial(rho * scale).map(|v| amplitude * v),
            _ => None,
        }
    }

    fn metric_breakpoints(&self) -> Vec<f64> {
        match self {
            Node::Gauss { cutoff, .. } => vec![2.0 * cutoff / 3f64.sqrt()],
            Node::Symmetrized { inner, .. } => inner.breakpoints(),
            Node::Scaled { scale, inner, .. } => inner.metric_breakpoints().into_iter().map(|b| b / scale).collect(),
            _ => Vec::new(),
        }
    }

    /// Radius of the support of x -> node(B x).
    fn support_under(&self, b: &Block) -> f64 {
        let smin = block_min_singular(b);
        match self {
            Node::Zero => 0.0,
            Node::Ball { r2, .. } | Node::BlockQuad { r2, .. } => r2.sqrt() / smin,
            Node::Shell { r2sq, .. } => r2sq.sqrt() / smin,
            Node::Table(p) => {
                if p.max_value() == 0.0 {
                    0.0
                } else {
                    p.knots().last().copied().unwrap_or(0.0) / smin
                }
            }
            Node::Gauss { cutoff, .. } => {
                // q(B x) <= c^2  iff  |M^-1 B x| <= 2c / sqrt(3)
                let mi = metric_matrix().m_inverse;
                2.0 * cutoff / 3f64.sqrt() / block_min_singular(&crate::geometry::block_mul(&mi, b))
            }
            Node::Scaled { scale, inner, .. } => {
                let sb = [[b[0][0] * scale, b[0][1] * scale], [b[1][0] * scale, b[1][1] * scale]];
                inner.support_under(&sb)
            }
            Node::Linear { matrix, inner } => inner.support_under(&crate::geometry::block_mul(matrix, b)),
            Node::Symmetrized { maps, inner, .. } => maps
                .iter()
                .map(|g| inner.support_under(&crate::geometry::block_mul(g, b)))
                .fold(0.0, f64::max),
            Node::Grid(g) => g.support_radius() / smin,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Node::Ball { r2, .. } => vec![r2.sqrt()],
            Node::Shell { r1sq, r2sq, .. } => vec![r1sq.sqrt(), r2sq.sqrt()],
            Node::Table(p) => p.knots().to_vec(),
            Node::Scaled { scale, inner, .. } => inner.breakpoints().into_iter().map(|b| b / scale).collect(),
            Node::Linear { inner, .. } => inner.metric_breakpoints(),
            _ => Vec::new(),
        }
    }
}

const IDENTITY_BLOCK: Block = [[1.0, 0.0], [0.0, 1.0]];

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum()
}

/// Volume of the unit ball in R^d for d in {3, 6}.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        3 => 4.0 * PI / 3.0,
        6 => PI.powi(3) / 6.0,
        _ => {
            let d = dim as f64;
            PI.powf(d / 2.0) / gamma_half_int(d / 2.0 + 1.0)
        }
    }
}

/// Area of the unit sphere S^{d-1}.
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * unit_ball_volume(dim)
}

fn gamma_half_int(x: f64) -> f64 {
    // Gamma at integers and half integers, enough for ball volumes.
    if (x - 0.5).abs() < 1e-12 {
        return PI.sqrt();
    }
    if (x - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    (x - 1.0) * gamma_half_int(x - 1.0)
}

/// A nonnegative, compactly supported potential in dimension 3 or 6.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub dim: usize,
    pub descriptor: Descriptor,
    pub support_radius: f64,
    pub sup_norm: f64,
    pub nonnegative: bool,
    node: Node,
    integral: Option<f64>,
}

impl PotentialSpec {
    /// Compile a descriptor; grid files are resolved against the working directory.
    pub fn new(descriptor: Descriptor) -> Result<Self> {
        Self::with_base_dir(descriptor, Path::new("."))
    }

    /// Compile a descriptor, resolving relative grid paths against `base`.
    pub fn with_base_dir(descriptor: Descriptor, base: &Path) -> Result<Self> {
        let c = compile(&descriptor, base)?;
        if !(c.sup >= 0.0) || !c.sup.is_finite() {
            return Err(Error::invalid("potential sup norm must be finite"));
        }
        if !c.nonneg {
            return Err(Error::invalid("potential takes negative values"));
        }
        Ok(PotentialSpec {
            dim: c.dim,
            descriptor,
            support_radius: c.node.support_under(&IDENTITY_BLOCK),
            sup_norm: c.sup,
            nonnegative: c.nonneg,
            node: c.node,
            integral: c.integral,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Descriptor = serde_json::from_str(text)?;
        Self::new(d)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d: Descriptor = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::with_base_dir(d, &base)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(Descriptor::Zero { dim }).expect("zero potential is valid")
    }

    pub fn square_well(dim: usize, v0: f64, radius: f64) -> Result<Self> {
        Self::new(Descriptor::SquareWell { dim, v0, radius })
    }

    pub fn annulus(dim: usize, r1: f64, r2: f64) -> Result<Self> {
        Self::new(Descriptor::RadialAnnulusIndicator { dim, r1, r2 })
    }

    pub fn gaussian6d(amplitude: f64, width: f64, cutoff: f64) -> Result<Self> {
        Self::new(Descriptor::Gaussian6d { amplitude, width, cutoff })
    }

    /// `amplitude * self(length_scale * x)`.
    pub fn scaled(&self, amplitude: f64, length_scale: f64) -> Result<Self> {
        self.rebuild_scaled(amplitude, length_scale)
    }

    fn rebuild_scaled(&self, amplitude: f64, length_scale: f64) -> Result<Self> {
        check_scale(amplitude, length_scale)?;
        Ok(PotentialSpec {
            dim: self.dim,
            descriptor: Descriptor::Scaled {
                amplitude,
                length_scale,
                inner: Box::new(self.descriptor.clone()),
            },
            support_radius: self.support_radius / length_scale,
            sup_norm: amplitude * self.sup_norm,
            nonnegative: true,
            node: Node::Scaled {
                amplitude,
                scale: length_scale,
                inner: Box::new(self.node.clone()),
            },
            integral: self.integral.map(|i| amplitude * i / length_scale.powi(self.dim as i32)),
        })
    }

    /// `self(B x)` for a block matrix B (dimension 6 only).
    pub fn linear(&self, matrix: Block) -> Result<Self> {
        if self.dim != 6 {
            return Err(Error::DimensionMismatch { expected: 6, got: self.dim });
        }
        let smin = block_min_singular(&matrix);
        if !(smin > 0.0) {
            return Err(Error::invalid("block matrix must be invertible"));
        }
        Ok(PotentialSpec {
            dim: 6,
            descriptor: Descriptor::BlockLinear {
                matrix,
                inner: Box::new(self.descriptor.clone()),
            },
            support_radius: self.node.support_under(&matrix),
            sup_norm: self.sup_norm,
            nonnegative: true,
            node: Node::Linear {
                matrix,
                inner: Box::new(self.node.clone()),
            },
            integral: self.integral.map(|i| i / block_det(&matrix).abs().powi(3)),
        })
    }

    pub(crate) fn symmetrized_unchecked(&self) -> Self {
        let mg = metric_matrix();
        let maps: Vec<Block> = symmetry_group()
            .iter()
            .map(|g| crate::geometry::block_mul(&mg.m_inverse, &g.as_block()))
            .collect();
        let det_inv = 1.0 / mg.det_m;
        PotentialSpec {
            dim: 6,
            descriptor: Descriptor::Symmetrized {
                inner: Box::new(self.descriptor.clone()),
            },
            support_radius: Node::Symmetrized { maps: maps.clone(), det_inv, inner: Box::new(self.node.clone()) }
                .support_under(&IDENTITY_BLOCK),
            sup_norm: self.sup_norm * det_inv,
            nonnegative: true,
            node: Node::Symmetrized {
                maps,
                det_inv,
                inner: Box::new(self.node.clone()),
            },
            integral: self.integral,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.node.eval(self.dim, x)
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    pub fn is_radial(&self) -> bool {
        self.node.radial(0.0).is_some()
    }

    /// Value at radius r for radial potentials.
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        self.node.radial(r)
    }

    /// True for six-dimensional potentials of the form g(|M^-1 x|).
    pub fn is_metric_radial(&self) -> bool {
        self.dim == 6 && self.node.metric_radial(0.0).is_some()
    }

    /// g(rho) for potentials of the form g(|M^-1 x|).
    pub fn metric_radial_value(&self, rho: f64) -> Option<f64> {
        if self.dim == 6 {
            self.node.metric_radial(rho)
        } else {
            None
        }
    }

    pub fn metric_radial_breakpoints(&self) -> Vec<f64> {
        let mut b = self.node.metric_breakpoints();
        b.retain(|r| r.is_finite() && *r > 0.0);
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup();
        b
    }

    /// Radii where a radial profile may be discontinuous or change formula.
    pub fn radial_breakpoints(&self) -> Vec<f64> {
        let mut b = self.node.breakpoints();
        b.retain(|r| r.is_finite() && *r > 0.0);
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup();
        b
    }

    /// Integral over R^d when an accurate reduction is available.
    pub fn integral(&self) -> Option<f64> {
        self.integral
    }

    /// Average over the cube of side h centered at `center`, by midpoint
    /// sub-sampling of the part of the cube inside the support box.
    pub fn cell_average(&self, center: &[f64], h: f64, sub: usize) -> f64 {
        let d = self.dim;
        let r0 = self.support_radius;
        let mut lo = [0.0; 6];
        let mut step = [0.0; 6];
        let mut frac = 1.0;
        for k in 0..d {
            let a = (center[k] - h / 2.0).max(-r0);
            let b = (center[k] + h / 2.0).min(r0);
            if b <= a {
                return 0.0;
            }
            lo[k] = a;
            step[k] = (b - a) / sub as f64;
            frac *= (b - a) / h;
        }
        let total = sub.pow(d as u32);
        let mut acc = 0.0;
        let mut x = [0.0; 6];
        for idx in 0..total {
            let mut rem = idx;
            for k in 0..d {
                x[k] = lo[k] + (rem % sub) as f64 * step[k] + 0.5 * step[k];
                rem /= sub;
            }
            acc += self.eval(&x[..d]);
        }
        acc / total as f64 * frac
    }
}

struct Compiled {
    dim: usize,
    node: Node,
    support: f64,
    sup: f64,
    nonneg: bool,
    integral: Option<f64>,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 3 || dim == 6 {
        Ok(())
    } else {
        Err(Error::invalid(format!("dimension must be 3 or 6, got {dim}")))
    }
}

fn check_scale(amplitude: f64, length_scale: f64) -> Result<()> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::invalid("scaled amplitude must be finite and nonnegative"));
    }
    if !(length_scale > 0.0) || !length_scale.is_finite() {
        return Err(Error::invalid("scaled length_scale must be positive"));
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

fn radial_integral(dim: usize, f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let (nodes, weights) = gauss_legendre(12);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = (b - a) / 2.0;
        let mid = (a + b) / 2.0;
        for (t, wt) in nodes.iter().zip(&weights) {
            let r = mid + half * t;
            total += wt * half * r.powi(dim as i32 - 1) * f(r);
        }
    }
    total * unit_sphere_area(dim)
}

fn compile(desc: &Descriptor, base: &Path) -> Result<Compiled> {
    Ok(match desc {
        Descriptor::Zero { dim } => {
            check_dim(*dim)?;
            Compiled { dim: *dim, node: Node::Zero, support: 0.0, sup: 0.0, nonneg: true, integral: Some(0.0) }
        }
        Descriptor::SquareWell { dim, v0, radius } => {
            check_dim(*dim)?;
            positive("radius", *radius)?;
            if !v0.is_finite() {
                return Err(Error::invalid("v0 must be finite"));
            }
            Compiled {
                dim: *dim,
                node: Node::Ball { height: *v0, r2: radius * radius },
                support: *radius,
                sup: v0.abs(),
                nonneg: *v0 >= 0.0,
                integral: Some(v0 * unit_ball_volume(*dim) * radius.powi(*dim as i32)),
            }
        }
        Descriptor::RadialAnnulusIndicator { dim, r1, r2 } => {
            check_dim(*dim)?;
            if !(*r1 >= 0.0 && r2 > r1 && r2.is_finite()) {
                return Err(Error::invalid(format!("annulus needs 0 <= r1 < r2, got r1={r1}, r2={r2}")));
            }
            let vol = unit_ball_volume(*dim) * (r2.powi(*dim as i32) - r1.powi(*dim as i32));
            let height = 1.0 / vol;
            Compiled {
                dim: *dim,
                node: Node::Shell { height, r1sq: r1 * r1, r2sq: r2 * r2 },
                support: *r2,
                sup: height,
                nonneg: true,
                integral: Some(1.0),
            }
        }
        Descriptor::RadialTable { dim, radii, values } => {
            check_dim(*dim)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("radial table values must be finite"));
            }
            let p = Pchip::new(radii.clone(), values.clone())?;
            let mut breaks = vec![0.0];
            breaks.extend(radii.iter().copied().filter(|r| *r > 0.0));
            let integral = radial_integral(*dim, |r| p.eval(r), &breaks);
            let support = if values.iter().all(|v| *v == 0.0) { 0.0 } else { *radii.last().unwrap() };
            Compiled {
                dim: *dim,
                sup: p.max_value(),
                nonneg: values.iter().all(|v| *v >= 0.0),
                node: Node::Table(Arc::new(p)),
                support,
                integral: Some(integral),
            }
        }
        Descriptor::Gaussian6d { amplitude, width, cutoff } => {
            positive("width", *width)?;
            positive("cutoff", *cutoff)?;
            if !amplitude.is_finite() {
                return Err(Error::invalid("amplitude must be finite"));
            }
            let inv_w2 = 1.0 / (width * width);
            let floor = (-cutoff * cutoff * inv_w2).exp();
            // In y = M^-1 x the form is (3/4)|y|^2, and dx = det M dy.
            let rho = 2.0 * cutoff / 3f64.sqrt();
            let det_m = metric_matrix().det_m;
            let integral = det_m
                * radial_integral(6, |r| amplitude * ((-0.75 * r * r * inv_w2).exp() - floor).max(0.0), &[0.0, rho]);
            Compiled {
                dim: 6,
                node: Node::Gauss { amplitude: *amplitude, inv_w2, floor, cutoff: *cutoff },
                support: 2f64.sqrt() * cutoff,
                sup: amplitude.abs() * (1.0 - floor),
                nonneg: *amplitude >= 0.0,
                integral: Some(integral),
            }
        }
        Descriptor::BlockQuadratic { xx, yy, xy, radius } => {
            positive("radius", *radius)?;
            // Nonnegative iff the 2x2 form [[xx, xy/2],[xy/2, yy]] is PSD.
            let nonneg = *xx >= 0.0 && *yy >= 0.0 && xx * yy - xy * xy / 4.0 >= -1e-15;
            let lam = crate::geometry::block_sym_eigenvalues(&[[*xx, xy / 2.0], [xy / 2.0, *yy]]);
            let r8 = radius.powi(8);
            Compiled {
                dim: 6,
                node: Node::BlockQuad { xx: *xx, yy: *yy, xy: *xy, r2: radius * radius },
                support: *radius,
                sup: lam[1].abs().max(lam[0].abs()) * radius * radius,
                nonneg,
                integral: Some((xx + yy) / 2.0 * unit_sphere_area(6) * r8 / 8.0),
            }
        }
        Descriptor::Scaled { amplitude, length_scale, inner } => {
            check_scale(*amplitude, *length_scale)?;
            let c = compile(inner, base)?;
            Compiled {
                dim: c.dim,
                support: c.support / length_scale,
                sup: amplitude * c.sup,
                nonneg: c.nonneg,
                integral: c.integral.map(|i| amplitude * i / length_scale.powi(c.dim as i32)),
                node: Node::Scaled { amplitude: *amplitude, scale: *length_scale, inner: Box::new(c.node) },
            }
        }
        Descriptor::BlockLinear { matrix, inner } => {
            let c = compile(inner, base)?;
            if c.dim != 6 {
                return Err(Error::DimensionMismatch { expected: 6, got: c.dim });
            }
            let smin = block_min_singular(matrix);
            if !(smin > 0.0) {
                return Err(Error::invalid("block matrix must be invertible"));
            }
            Compiled {
                dim: 6,
                support: c.support / smin,
                sup: c.sup,
                nonneg: c.nonneg,
                integral: c.integral.map(|i| i / block_det(matrix).abs().powi(3)),
                node: Node::Linear { matrix: *matrix, inner: Box::new(c.node) },
            }
        }
        Descriptor::Symmetrized { inner } => {
            let c = compile(inner, base)?;
            if c.dim != 6 {
                return Err(Error::DimensionMismatch { expected: 6, got: c.dim });
            }
            let mg = metric_matrix();
            let m_inv = block_inverse(&mg.m);
            let maps: Vec<Block> = symmetry_group()
                .iter()
                .map(|g| crate::geometry::block_mul(&m_inv, &g.as_block()))
                .collect();
            let det_inv = 1.0 / mg.det_m;
            Compiled {
                dim: 6,
                support: c.support * 1.5f64.sqrt(),
                sup: c.sup * det_inv,
                nonneg: c.nonneg,
                integral: c.integral,
                node: Node::Symmetrized { maps, det_inv, inner: Box::new(c.node) },
            }
        }
        Descriptor::Grid { dim, n, spacing, data_file } => {
            check_dim(*dim)?;
            positive("spacing", *spacing)?;
            let path = base.join(data_file);
            let (header, data) = gridfile::read_real(&path)?;
            if header.dim != *dim || header.n != *n {
                return Err(Error::invalid(format!(
                    "grid file {} has dim={}, n={}, descriptor says dim={dim}, n={n}",
                    path.display(),
                    header.dim,
                    header.n
                )));
            }
            if (header.spacing - spacing).abs() > 1e-12 * spacing {
                return Err(Error::invalid(format!(
                    "grid file spacing {} differs from descriptor spacing {spacing}",
                    header.spacing
                )));
            }
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("grid samples must be finite"));
            }
            let g = GridSamples { dim: *dim, n: *n, spacing: *spacing, data };
            let sup = g.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let nonneg = g.data.iter().all(|v| *v >= 0.0);
            let integral = g.data.iter().sum::<f64>() * spacing.powi(*dim as i32);
            Compiled {
                dim: *dim,
                support: g.support_radius(),
                sup,
                nonneg,
                integral: Some(integral),
                node: Node::Grid(Arc::new(g)),
            }
        }
    })
}
