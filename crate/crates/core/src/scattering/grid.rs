//! Cell-centered Cartesian grid restricted to a Euclidean ball, and the
//! matrix-free scattering operators on it.
//!
//! Nodes are stored row by row along axis 0. A dense table maps the
//! transverse coordinates of a row to its position in the row list.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{block_apply, metric_matrix, norm};
use crate::potential::PotentialSpec;

const NO_ROW: u32 = u32::MAX;
const MAX_NODES: u128 = 1 << 27;

#[derive(Clone, Copy, Debug)]
struct Row {
    trans: usize,
    coords: [u16; 5],
    start: usize,
    len: usize,
    offset: usize,
}

#[derive(Clone, Debug)]
pub struct BallGrid {
    pub dim: usize,
    /// Cells per axis across the bounding cube [-L, L]^d.
    pub cells: usize,
    pub radius: f64,
    pub h: f64,
    rows: Vec<Row>,
    lookup: Vec<u32>,
    nodes: usize,
    groups: Vec<(usize, usize)>,
}

impl BallGrid {
    pub fn new(dim: usize, cells: usize, radius: f64) -> Result<Self> {
        if dim != 3 && dim != 6 {
            return Err(Error::invalid(format!("dimension {dim} is not supported")));
        }
        if cells < 2 || cells > u16::MAX as usize {
            return Err(Error::invalid(format!("cell count {cells} out of range")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("domain radius must be positive"));
        }
        // Rough count: ball volume over cell volume.
        let est = crate::potential::unit_ball_volume(dim) * (cells as f64 / 2.0).powi(dim as i32);
        if est as u128 > MAX_NODES {
            return Err(Error::TooLarge { what: "ball grid".into(), estimate: est as u128, limit: MAX_NODES });
        }
        let h = 2.0 * radius / cells as f64;
        let nt = cells.pow(dim as u32 - 1);
        let mut lookup = vec![NO_ROW; nt];
        let mut rows = Vec::new();
        let mut nodes = 0usize;
        let coord = |i: usize| -radius + (i as f64 + 0.5) * h;
        for t in 0..nt {
            let mut c = [0u16; 5];
            let mut rem = t;
            let mut r2 = 0.0;
            for k in 0..dim - 1 {
                c[k] = (rem % cells) as u16;
                rem /= cells;
                r2 += coord(c[k] as usize).powi(2);
            }
            if r2 > radius * radius {
                continue;
            }
            let a = (radius * radius - r2).sqrt();
            let lo = ((radius - a) / h - 0.5).ceil().max(0.0) as usize;
            let hi = (((radius + a) / h - 0.5).floor() as isize).min(cells as isize - 1);
            if hi < lo as isize {
                continue;
            }
            let len = hi as usize - lo + 1;
            lookup[t] = rows.len() as u32;
            rows.push(Row { trans: t, coords: c, start: lo, len, offset: nodes });
            nodes += len;
        }
        let mut groups = Vec::new();
        let mut first = 0;
        let mut acc = 0;
        for (i, r) in rows.iter().enumerate() {
            acc += r.len;
            if acc >= 4096 {
                groups.push((first, i + 1));
                first = i + 1;
                acc = 0;
            }
        }
        if first < rows.len() {
            groups.push((first, rows.len()));
        }
        Ok(Self { dim, cells, radius, h, rows, lookup, nodes, groups })
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.h
    }

    /// Calls `f(node, position)` for every node in storage order.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, &[f64])) {
        let d = self.dim;
        let mut x = [0.0; 6];
        for r in &self.rows {
            for k in 0..d - 1 {
                x[k + 1] = self.coordinate(r.coords[k] as usize);
            }
            for j in 0..r.len {
                x[0] = self.coordinate(r.start + j);
                f(r.offset + j, &x[..d]);
            }
        }
    }

    pub fn positions(&self) -> Vec<[f64; 6]> {
        let mut out = vec![[0.0; 6]; self.nodes];
        self.for_each_node(|i, x| out[i][..x.len()].copy_from_slice(x));
        out
    }

    /// Node at integer cell coordinates, if inside the ball.
    pub fn node_at(&self, c: &[isize]) -> Option<usize> {
        let n = self.cells as isize;
        if c.iter().any(|&v| v < 0 || v >= n) {
            return None;
        }
        let mut t = 0usize;
        let mut stride = 1usize;
        for &v in &c[1..] {
            t += v as usize * stride;
            stride *= self.cells;
        }
        let id = self.lookup[t];
        if id == NO_ROW {
            return None;
        }
        let row = &self.rows[id as usize];
        let i = c[0] as usize;
        (i >= row.start && i < row.start + row.len).then(|| row.offset + i - row.start)
    }

    /// Integer cell coordinates of every node in storage order.
    pub fn node_coords(&self) -> Vec<[i32; 6]> {
        let mut out = Vec::with_capacity(self.nodes);
        for r in &self.rows {
            for j in 0..r.len {
                let mut c = [0i32; 6];
                c[0] = (r.start + j) as i32;
                for k in 0..self.dim - 1 {
                    c[k + 1] = r.coords[k] as i32;
                }
                out.push(c);
            }
        }
        out
    }

    fn neighbor_row(&self, row: &Row, e: &Edge) -> Option<&Row> {
        let n = self.cells as i32;
        for k in 0..self.dim - 1 {
            let c = row.coords[k] as i32 + e.shift[k + 1];
            if c < 0 || c >= n {
                return None;
            }
        }
        let t = (row.trans as isize + e.trans_delta) as usize;
        let id = self.lookup[t];
        (id != NO_ROW).then(|| &self.rows[id as usize])
    }
}

/// Kinetic part of the scattering operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// -2 Laplacian.
    #[serde(alias = "std")]
    Standard,
    /// -2 div(M^2 grad) in R^6.
    #[serde(alias = "mod")]
    Modified,
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    shift: [i32; 6],
    trans_delta: isize,
    coef: f64,
}

fn edges(dim: usize, cells: usize, h: f64, metric: Metric) -> Vec<Edge> {
    let mut shifts: Vec<([i32; 6], f64)> = Vec::new();
    let unit = |a: usize, s: i32| {
        let mut v = [0i32; 6];
        v[a] = s;
        v
    };
    match metric {
        Metric::Standard => {
            for a in 0..dim {
                for s in [1, -1] {
                    shifts.push((unit(a, s), 1.0));
                }
            }
        }
        Metric::Modified => {
            // Symbol |p|^2 + |q|^2 + |p + q|^2 = 2 (p, q) M^2 (p, q)^T.
            for a in 0..6 {
                for s in [1, -1] {
                    shifts.push((unit(a, s), 0.5));
                }
            }
            for c in 0..3 {
                for s in [1, -1] {
                    let mut v = [0i32; 6];
                    v[c] = s;
                    v[c + 3] = s;
                    shifts.push((v, 0.5));
                }
            }
        }
    }
    shifts
        .into_iter()
        .map(|(shift, w)| {
            let mut delta = 0isize;
            let mut stride = 1isize;
            for &s in &shift[1..dim] {
                delta += s as isize * stride;
                stride *= cells as isize;
            }
            Edge { shift, trans_delta: delta, coef: 2.0 * w / (h * h) }
        })
        .collect()
}

/// Treatment of stencil edges that leave the ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Ghost value rho * omega_i with the decay ratio of r^(2-d).
    Monopole,
    /// Edges leaving the ball are dropped (natural boundary condition).
    Neumann,
}

/// Sparse symmetric operator K + V on a ball grid, where K is the kinetic
/// stencil closed at the ball boundary and V is diagonal.
pub struct ScatteringOperator<'g> {
    pub grid: &'g BallGrid,
    pub metric: Metric,
    edges: Vec<Edge>,
    /// Kinetic diagonal including the boundary closure.
    kin_diag: Vec<f64>,
    pub potential: Vec<f64>,
    diag: Vec<f64>,
}

impl<'g> ScatteringOperator<'g> {
    pub fn new(grid: &'g BallGrid, metric: Metric, potential: Vec<f64>) -> Result<Self> {
        Self::with_closure(grid, metric, potential, Closure::Monopole)
    }

    pub fn with_closure(grid: &'g BallGrid, metric: Metric, potential: Vec<f64>, closure: Closure) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: potential.len() });
        }
        if metric == Metric::Modified && grid.dim != 6 {
            return Err(Error::invalid("the modified metric needs dimension 6"));
        }
        let d = grid.dim;
        let edges = edges(d, grid.cells, grid.h, metric);
        let minv = metric_matrix().m_inverse;
        let radial = |x: &[f64]| match metric {
            Metric::Standard => norm(x),
            Metric::Modified => norm(&block_apply(&minv, x)),
        };
        let total: f64 = edges.iter().map(|e| e.coef).sum();
        let mut kin_diag = vec![total; grid.len()];
        let h = grid.h;
        let p = (d - 2) as i32;
        for row in &grid.rows {
            let mut x = [0.0; 6];
            for k in 0..d - 1 {
                x[k + 1] = grid.coordinate(row.coords[k] as usize);
            }
            for e in &edges {
                let (lo, hi) = overlap(row, grid.neighbor_row(row, e), e.shift[0]);
                for j in (0..row.len).filter(|&j| j < lo || j >= hi) {
                    x[0] = grid.coordinate(row.start + j);
                    let mut ghost = [0.0; 6];
                    for k in 0..d {
                        ghost[k] = x[k] + e.shift[k] as f64 * h;
                    }
                    let rho = match closure {
                        Closure::Monopole => (radial(&x[..d]) / radial(&ghost[..d])).powi(p).min(1.0),
                        Closure::Neumann => 1.0,
                    };
                    kin_diag[row.offset + j] -= e.coef * rho;
                }
            }
        }
        let diag = kin_diag.iter().zip(&potential).map(|(k, v)| k + v).collect();
        Ok(Self { grid, metric, edges, kin_diag, potential, diag })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// y = (K + V) x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_with(x, y, &self.diag);
    }

    /// y = K x.
    pub fn apply_kinetic(&self, x: &[f64], y: &mut [f64]) {
        self.apply_with(x, y, &self.kin_diag);
    }

    fn apply_with(&self, x: &[f64], y: &mut [f64], diag: &[f64]) {
        let grid = self.grid;
        let mut segments = Vec::with_capacity(grid.groups.len());
        let mut rest = y;
        for &(a, b) in &grid.groups {
            let start = grid.rows[a].offset;
            let end = grid.rows[b - 1].offset + grid.rows[b - 1].len;
            let (head, tail) = rest.split_at_mut(end - start);
            segments.push((a, b, start, head));
            rest = tail;
        }
        segments.into_par_iter().for_each(|(a, b, base, seg)| {
            for row in &grid.rows[a..b] {
                let ys = &mut seg[row.offset - base..row.offset - base + row.len];
                let xs = &x[row.offset..row.offset + row.len];
                let ds = &diag[row.offset..row.offset + row.len];
                for ((yi, xi), di) in ys.iter_mut().zip(xs).zip(ds) {
                    *yi = di * xi;
                }
                for e in &self.edges {
                    let nb = grid.neighbor_row(row, e);
                    let (lo, hi) = overlap(row, nb, e.shift[0]);
                    if let Some(nb) = nb {
                        if hi > lo {
                            // Neighbor of local index j is nb-local index j + start + s - nb.start.
                            let src0 = (nb.offset as isize + row.start as isize + e.shift[0] as isize
                                - nb.start as isize + lo as isize) as usize;
                            let xs = &x[src0..src0 + (hi - lo)];
                            for (yi, xi) in ys[lo..hi].iter_mut().zip(xs) {
                                *yi -= e.coef * xi;
                            }
                        }
                    }
                }
            }
        });
    }

    /// Quadratic form x.K x times the cell volume.
    pub fn kinetic_energy(&self, x: &[f64]) -> f64 {
        let mut kx = vec![0.0; x.len()];
        self.apply_kinetic(x, &mut kx);
        crate::linalg::dot(x, &kx) * self.grid.h.powi(self.grid.dim as i32)
    }
}

/// Local index range [lo, hi) of `row` whose shifted neighbor lies in `nb`.
fn overlap(row: &Row, nb: Option<&Row>, s: i32) -> (usize, usize) {
    let Some(nb) = nb else { return (0, 0) };
    let a = row.start as isize;
    let lo = (nb.start as isize - s as isize).max(a) - a;
    let hi = (nb.start as isize + nb.len as isize - s as isize).min(a + row.len as isize) - a;
    if hi <= lo {
        (0, 0)
    } else {
        (lo as usize, hi as usize)
    }
}

/// Cell averages of v at every node. Cells farther than the support plus a
/// half diagonal are skipped.
pub fn sample_potential(v: &PotentialSpec, grid: &BallGrid, sub: usize) -> Vec<f64> {
    let d = grid.dim;
    let reach = v.support_radius + 0.5 * grid.h * (d as f64).sqrt();
    let pos = grid.positions();
    pos.par_iter()
        .map(|x| {
            if norm(&x[..d]) > reach || v.is_zero() {
                0.0
            } else {
                v.cell_average(&x[..d], grid.h, sub)
            }
        })
        .collect()
}
