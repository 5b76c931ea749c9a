//! Problem instances shared by the benchmarks.

use gpscatter::fewbody::{build_system, FewBodySystem, ThreeBodyWeights};
use gpscatter::gp::{OneBody, OneBodySpec, Stencil};
use gpscatter::scattering::{scale_potential, Metric, ScatteringProblem};
use gpscatter::PotentialSpec;

pub fn square_well() -> PotentialSpec {
    PotentialSpec::square_well(3, 50.0, 1.0).unwrap()
}

pub fn default_interaction() -> PotentialSpec {
    PotentialSpec::gaussian6d(50.0, 1.0, 1.0).unwrap()
}

/// Square well on a ball of radius 4 with `cells` across the diameter.
pub fn well_problem(cells: usize) -> ScatteringProblem {
    ScatteringProblem::new(&square_well(), Metric::Standard, cells, 4.0, 2).unwrap()
}

/// Default interaction under the modified metric on a 6D ball grid.
pub fn modified_problem(cells: usize) -> ScatteringProblem {
    let v = default_interaction();
    ScatteringProblem::new(&v, Metric::Modified, cells, 4.0 * v.support_radius, 2).unwrap()
}

pub fn harmonic(points: usize) -> OneBody {
    OneBodySpec::harmonic(points).build().unwrap()
}

/// `n` bosons on an `l`^3 lattice of spacing 0.5 with the scaled default interaction.
pub fn few_body(l: usize, n: usize) -> FewBodySystem {
    let h = 0.5;
    let ob = OneBodySpec {
        half_width: Some(0.5 * (l as f64 + 1.0) * h),
        stencil: Some(Stencil::Second),
        ..OneBodySpec::harmonic(l)
    }
    .build()
    .unwrap();
    let w = ThreeBodyWeights::hat_averaged(&scale_potential(&default_interaction(), n as u64, 0.5).unwrap(), h).unwrap();
    build_system(ob, n, w).unwrap()
}
