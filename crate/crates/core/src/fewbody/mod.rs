//! Exact diagonalization of a few trapped bosons on a small lattice:
//! `H = sum_i h_i + sum_{i<j<k} W(x_i - x_j, x_i - x_k)` on the symmetric
//! subspace, with reduced density matrices and collision probabilities.

mod basis;
mod interaction;
mod observables;
mod system;

pub use basis::{basis_size, Basis, MAX_BASIS, MAX_PARTICLES};
pub use interaction::ThreeBodyWeights;
pub use observables::{
    condensate_fraction, four_body_collision, partial_trace, product_state, reduced_density_matrix,
    DensityMatrixSummary, ReducedDensityMatrix, MAX_RDM_DIM,
};
pub use system::{
    binding_check, build_system, ground_state, one_body_ground_energy, BindingReport, FewBodySystem, GroundState,
};

#[cfg(test)]
mod tests;
