//! The metric matrix M, the three-body symmetry group G and related
//! coordinate transforms on R^3 (+) R^3.
//!
//! A "block" matrix is a 2x2 matrix whose scalar entries multiply the 3x3
//! identity, acting on x = (x_1, x_2) with x_1, x_2 in R^3.

pub(crate) mod com;
mod symmetry;

pub use com::{
    kinetic_split, lattice_dispersion, remove_center_of_mass, PairPotential, RelativeOperator,
    ThreeBodyLatticeOperator,
};
pub use symmetry::{
    check_three_body_symmetry, check_three_body_symmetry_at, integrate_hyperspherical,
    symmetrize_dyson_potential, symmetrized_integral, symmetry_sample_points, SymmetryReport,
};

use serde::{Deserialize, Serialize};

pub type Block = [[f64; 2]; 2];
pub type IntBlock = [[i64; 2]; 2];

pub const IDENTITY: IntBlock = [[1, 0], [0, 1]];
pub const SWAP: IntBlock = [[0, 1], [1, 0]];
pub const A_MAP: IntBlock = [[1, -1], [0, -1]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupElement {
    pub name: &'static str,
    pub matrix: IntBlock,
}

impl GroupElement {
    pub fn as_block(&self) -> Block {
        to_block(&self.matrix)
    }

    pub fn apply(&self, x: &[f64]) -> [f64; 6] {
        block_apply(&self.as_block(), x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricGroup {
    pub m: Block,
    pub m_inverse: Block,
    /// Determinant of M acting on R^6.
    pub det_m: f64,
    pub elements: Vec<GroupElement>,
}

pub fn metric_matrix() -> MetricGroup {
    let s3 = 3f64.sqrt();
    let c = 1.0 / (2.0 * 2f64.sqrt());
    let m = [[c * (s3 + 1.0), c * (s3 - 1.0)], [c * (s3 - 1.0), c * (s3 + 1.0)]];
    let m_inverse = block_inverse(&m);
    let det_m = block_det(&m).powi(3);
    MetricGroup {
        m,
        m_inverse,
        det_m,
        elements: symmetry_group(),
    }
}

/// The six elements in the order I, S, A, AS, SA, ASA.
pub fn symmetry_group() -> Vec<GroupElement> {
    let as_ = int_mul(&A_MAP, &SWAP);
    let sa = int_mul(&SWAP, &A_MAP);
    let asa = int_mul(&as_, &A_MAP);
    vec![
        GroupElement { name: "I", matrix: IDENTITY },
        GroupElement { name: "S", matrix: SWAP },
        GroupElement { name: "A", matrix: A_MAP },
        GroupElement { name: "AS", matrix: as_ },
        GroupElement { name: "SA", matrix: sa },
        GroupElement { name: "ASA", matrix: asa },
    ]
}

/// Index of `g` in the canonical element list, if it is a member.
pub fn group_index(elements: &[GroupElement], g: &IntBlock) -> Option<usize> {
    elements.iter().position(|e| &e.matrix == g)
}

/// Multiplication table: `table[i][j]` is the index of `elements[i] * elements[j]`.
/// Returns `None` if the set is not closed.
pub fn multiplication_table(elements: &[GroupElement]) -> Option<Vec<Vec<usize>>> {
    elements
        .iter()
        .map(|a| {
            elements
                .iter()
                .map(|b| group_index(elements, &int_mul(&a.matrix, &b.matrix)))
                .collect()
        })
        .collect()
}

pub fn int_mul(a: &IntBlock, b: &IntBlock) -> IntBlock {
    let mut c = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn int_det(a: &IntBlock) -> i64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn to_block(a: &IntBlock) -> Block {
    [
        [a[0][0] as f64, a[0][1] as f64],
        [a[1][0] as f64, a[1][1] as f64],
    ]
}

pub fn block_mul(a: &Block, b: &Block) -> Block {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn block_transpose(a: &Block) -> Block {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn block_det(a: &Block) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn block_inverse(a: &Block) -> Block {
    let d = block_det(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

/// Max-entry norm of a - b.
pub fn block_max_diff(a: &Block, b: &Block) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Eigenvalues of a symmetric 2x2 block, ascending.
pub fn block_sym_eigenvalues(a: &Block) -> [f64; 2] {
    let tr = a[0][0] + a[1][1];
    let diff = a[0][0] - a[1][1];
    let disc = (diff * diff + 4.0 * a[0][1] * a[1][0]).sqrt();
    [(tr - disc) / 2.0, (tr + disc) / 2.0]
}

/// Apply a block matrix to x in R^6 (x[0..3] is the first block).
pub fn block_apply(b: &Block, x: &[f64]) -> [f64; 6] {
    let mut y = [0.0; 6];
    for k in 0..3 {
        y[k] = b[0][0] * x[k] + b[0][1] * x[k + 3];
        y[k + 3] = b[1][0] * x[k] + b[1][1] * x[k + 3];
    }
    y
}

/// The G-invariant quadratic form |x|^2 + |y|^2 - x.y.
pub fn invariant_quadratic(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        s += x[k] * x[k] + x[k + 3] * x[k + 3] - x[k] * x[k + 3];
    }
    s
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Smallest singular value of a block, i.e. of the 2x2 matrix.
pub fn block_min_singular(b: &Block) -> f64 {
    let btb = block_mul(&block_transpose(b), b);
    block_sym_eigenvalues(&btb)[0].max(0.0).sqrt()
}

pub fn block_max_singular(b: &Block) -> f64 {
    let btb = block_mul(&block_transpose(b), b);
    block_sym_eigenvalues(&btb)[1].max(0.0).sqrt()
}
