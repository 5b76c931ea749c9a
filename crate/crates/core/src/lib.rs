//! Numerical toolkit for dilute Bose gases with three-body interactions:
//! zero-energy scattering under the standard and modified metrics, Dyson
//! operator gaps, the energy-critical Gross-Pitaevskii minimizer, and
//! exact diagonalization of a few bosons on small lattices.

pub mod error;
pub mod fewbody;
pub mod geometry;
pub mod gp;
pub mod gridfile;
pub mod io;
pub mod lattice;
pub mod potential;
pub mod quad;
pub mod dyson;
pub mod scattering;

pub use error::{Error, Result};
pub use geometry::{metric_matrix, symmetry_group, GroupElement, MetricGroup};
pub use lattice::{Boundary, Lattice3};
pub use potential::{Descriptor, PotentialSpec};
pub mod linalg;
