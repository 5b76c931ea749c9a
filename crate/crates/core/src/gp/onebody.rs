use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Lattice3};
use crate::linalg::{Scalar, CHUNK};
use crate::quad::gauss_legendre;

/// External potential. Both forms are at least 1 everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trap {
    /// `c |x|^alpha + 1`.
    Power { c: f64, alpha: f64 },
    /// `sum_k omega_k^2 x_k^2 + 1`.
    Harmonic { omega: [f64; 3] },
}

impl Trap {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        match self {
            Trap::Power { c, alpha } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                c * r.powf(*alpha) + 1.0
            }
            Trap::Harmonic { omega } => 1.0 + (0..3).map(|k| omega[k] * omega[k] * x[k] * x[k]).sum::<f64>(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Trap::Power { c, alpha } => {
                if !(*c >= 0.0 && c.is_finite()) || !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::invalid(format!("power trap needs c >= 0 and alpha > 0, got c={c}, alpha={alpha}")));
                }
            }
            Trap::Harmonic { omega } => {
                if omega.iter().any(|w| !w.is_finite()) {
                    return Err(Error::invalid("harmonic trap frequencies must be finite"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorPotential {
    #[default]
    None,
    /// Uniform field in the symmetric gauge, `A = b x x / 2`.
    Uniform { b: [f64; 3] },
}

impl VectorPotential {
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        match self {
            VectorPotential::None => [0.0; 3],
            VectorPotential::Uniform { b } => [
                0.5 * (b[1] * x[2] - b[2] * x[1]),
                0.5 * (b[2] * x[0] - b[0] * x[2]),
                0.5 * (b[0] * x[1] - b[1] * x[0]),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Nearest-neighbor links.
    Second,
    /// Links of length one and two with weights 4/3 and -1/12.
    #[default]
    Fourth,
}

impl Stencil {
    fn weights(self) -> &'static [f64] {
        match self {
            Stencil::Second => &[1.0],
            Stencil::Fourth => &[4.0 / 3.0, -1.0 / 12.0],
        }
    }
}

fn default_points() -> usize {
    64
}

/// `h = (-i grad + A)^2 + V_ext` on a Dirichlet box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneBodySpec {
    pub trap: Trap,
    #[serde(default)]
    pub field: VectorPotential,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Box half-width; chosen from the trap when absent.
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Fourth order when absent, except where a caller documents otherwise.
    #[serde(default)]
    pub stencil: Option<Stencil>,
}

impl OneBodySpec {
    pub fn harmonic(points: usize) -> Self {
        OneBodySpec {
            trap: Trap::Harmonic { omega: [1.0; 3] },
            field: VectorPotential::None,
            points,
            half_width: None,
            stencil: None,
        }
    }

    /// Rough ground energy: min over t of 3/t^2 + max of V_ext on the axes at distance t.
    pub fn energy_estimate(&self) -> f64 {
        (1..400)
            .map(|i| {
                let t = 0.02 * i as f64;
                3.0 / (t * t) + axis_max(&self.trap, t)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest half-width at which the WKB decay exponent of a state at
    /// twice the estimated energy reaches 18 along every axis.
    pub fn auto_half_width(&self) -> f64 {
        let e = 2.0 * self.energy_estimate();
        let dt = 0.01;
        let mut actions = [0.0f64; 6];
        let mut t = 0.0;
        while t < 200.0 {
            t += dt;
            let mut all = true;
            for (k, a) in actions.iter_mut().enumerate() {
                let mut x = [0.0; 3];
                x[k / 2] = if k % 2 == 0 { t } else { -t };
                *a += (self.trap.eval(x) - e).max(0.0).sqrt() * dt;
                all &= *a >= 18.0;
            }
            if all {
                return t;
            }
        }
        t
    }

    pub fn build(&self) -> Result<OneBody> {
        self.build_with_default(Stencil::Fourth)
    }

    /// Build with `stencil` used when the spec does not name one.
    pub fn build_with_default(&self, stencil: Stencil) -> Result<OneBody> {
        self.trap.validate()?;
        let half_width = match self.half_width {
            Some(w) => w,
            None => self.auto_half_width(),
        };
        let trap = self.trap.clone();
        let field = self.field.clone();
        OneBody::from_samplers(self.points, half_width, self.stencil.unwrap_or(stencil), |x| trap.eval(x), |x| field.eval(x))
    }
}

fn axis_max(trap: &Trap, t: f64) -> f64 {
    let mut m = f64::MIN;
    for k in 0..6 {
        let mut x = [0.0; 3];
        x[k / 2] = if k % 2 == 0 { t } else { -t };
        m = m.max(trap.eval(x));
    }
    m
}

/// The discrete one-body operator as a sparse Hermitian matrix on the sites
/// of a Dirichlet lattice. Sites sit at `(i - (n-1)/2) h` with
/// `h = 2 half_width / (n + 1)`, so the zero boundary values fall on
/// `+-half_width`. Link phases are `exp(i int A.dl)` along each link.
#[derive(Clone, Debug)]
pub struct OneBody {
    pub lattice: Lattice3,
    pub half_width: f64,
    pub stencil: Stencil,
    pub v_ext: Vec<f64>,
    pub diagonal: Vec<f64>,
    offsets: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<Complex64>,
    real: bool,
}

impl OneBody {
    pub fn from_samplers(
        points: usize,
        half_width: f64,
        stencil: Stencil,
        v_ext: impl Fn([f64; 3]) -> f64 + Sync,
        a_field: impl Fn([f64; 3]) -> [f64; 3] + Sync,
    ) -> Result<Self> {
        if !(2..=512).contains(&points) {
            return Err(Error::invalid(format!("points per axis out of range: {points}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!("box half-width must be positive, got {half_width}")));
        }
        let h = 2.0 * half_width / (points as f64 + 1.0);
        let lattice = Lattice3::new(points, h, Boundary::Dirichlet)?;
        let sites = lattice.sites();
        let v: Vec<f64> = (0..sites).into_par_iter().map(|s| v_ext(lattice.position(s))).collect();
        if let Some((s, val)) = v.iter().enumerate().find(|(_, &x)| !(x >= 1.0) || !x.is_finite()) {
            return Err(Error::precondition(format!(
                "V_ext = {val} < 1 at {:?}; the trap must satisfy V_ext >= 1",
                lattice.position(s)
            )));
        }
        let (gx, gw) = gauss_legendre(4);
        // theta[axis][s]: phase of the unit link s -> s + e_axis.
        let theta: Vec<Vec<f64>> = (0..3)
            .map(|axis| {
                (0..sites)
                    .into_par_iter()
                    .map(|s| {
                        let p = lattice.position(s);
                        let mut acc = 0.0;
                        for (x, w) in gx.iter().zip(&gw) {
                            let mut q = p;
                            q[axis] += 0.5 * h * (1.0 + x);
                            let a = a_field(q);
                            if !a[axis].is_finite() {
                                return f64::NAN;
                            }
                            acc += 0.5 * w * a[axis];
                        }
                        acc * h
                    })
                    .collect()
            })
            .collect();
        if theta.iter().flatten().any(|t| !t.is_finite()) {
            return Err(Error::invalid("vector potential is not finite on the grid"));
        }
        let weights = stencil.weights();
        let n = points;
        let strides = [1usize, n, n * n];
        let inv_h2 = 1.0 / (h * h);
        let diag_kin: f64 = 6.0 * weights.iter().sum::<f64>() * inv_h2;
        let mut offsets = Vec::with_capacity(sites + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0u32);
        for s in 0..sites {
            let c = lattice.coords(s);
            for axis in 0..3 {
                for (k, w) in weights.iter().enumerate() {
                    let step = k + 1;
                    // Forward link s -> s + step e_axis.
                    if c[axis] + step < n {
                        let t: f64 = (0..step).map(|j| theta[axis][s + j * strides[axis]]).sum();
                        cols.push((s + step * strides[axis]) as u32);
                        vals.push(Complex64::from_polar(-w * inv_h2, t));
                    }
                    // Backward: the conjugate of the link ending at s.
                    if c[axis] >= step {
                        let start = s - step * strides[axis];
                        let t: f64 = (0..step).map(|j| theta[axis][start + j * strides[axis]]).sum();
                        cols.push(start as u32);
                        vals.push(Complex64::from_polar(-w * inv_h2, -t));
                    }
                }
            }
            offsets.push(cols.len() as u32);
        }
        let real = vals.iter().all(|z| z.im == 0.0);
        let diagonal = v.iter().map(|x| x + diag_kin).collect();
        Ok(OneBody { lattice, half_width, stencil, v_ext: v, diagonal, offsets, cols, vals, real })
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    pub fn spacing(&self) -> f64 {
        self.lattice.spacing
    }

    /// Cell volume h^3, the weight of the discrete L^2 inner product.
    pub fn cell_volume(&self) -> f64 {
        self.lattice.spacing.powi(3)
    }

    /// True when every link phase is trivial, so h is a real matrix.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Off-diagonal entries `(column, h_st)` of row s.
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let a = self.offsets[s] as usize;
        let b = self.offsets[s + 1] as usize;
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    /// y = h x.
    pub fn apply<T: Scalar>(&self, x: &[T], y: &mut [T]) {
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, yc)| {
            let base = ci * CHUNK;
            for (k, out) in yc.iter_mut().enumerate() {
                let s = base + k;
                let mut acc = x[s] * self.diagonal[s];
                for (c, v) in self.row(s) {
                    acc += T::from_complex(v) * x[c];
                }
                *out = acc;
            }
        });
    }

    /// `e^{-i chi} h e^{i chi}`, the operator seen by `e^{-i chi} u` after `A -> A + grad chi`,
    /// with the gradient integrated exactly along each link.
    pub fn gauge_transformed(&self, chi: &[f64]) -> Result<OneBody> {
        if chi.len() != self.sites() {
            return Err(Error::DimensionMismatch { expected: self.sites(), got: chi.len() });
        }
        let mut out = self.clone();
        for s in 0..self.sites() {
            let a = out.offsets[s] as usize;
            let b = out.offsets[s + 1] as usize;
            for k in a..b {
                let c = out.cols[k] as usize;
                out.vals[k] *= Complex64::from_polar(1.0, chi[c] - chi[s]);
            }
        }
        out.real = out.vals.iter().all(|z| z.im == 0.0);
        Ok(out)
    }
}
