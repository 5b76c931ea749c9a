//! The energy-critical Gross-Pitaevskii functional
//! `E(u) = <u, h u> + coupling int |u|^6` on a Dirichlet box, with
//! `h = (-i grad + A)^2 + V_ext`, and the mean-field and Hartree energies
//! it is compared against.

mod hartree;
mod minimize;
mod onebody;

pub use hartree::{hartree_energy_per_particle, hartree_interaction, lattice_triple_sum};
pub use minimize::{
    el_residual, gp_energy, gp_gradient, mean_field_energy, minimize_gp, minimize_gp_with, one_body_energy,
    sextic_integral, GPState, GpOptions, GridMeta,
};
pub use onebody::{OneBody, OneBodySpec, Stencil, Trap, VectorPotential};

#[cfg(test)]
mod tests;
