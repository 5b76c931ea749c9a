//! Dyson lemmas: operator gaps of -2 div 1_{|x| <= R2} grad + v - c U,
//! quadratic-form sampling of the many-body inequality on small lattices,
//! and the bootstrap schedule of length scales.

mod gap;
mod many_body;
mod schedule;

pub use gap::{dyson_gap, dyson_gap_dense, dyson_sweep, DysonGrid, DysonParams, DysonReport, DysonSweep};
pub use many_body::{
    lattice_modified_energy, many_body_dyson_check, ManyBodyDysonOptions, ManyBodyDysonReport, MAX_AMPLITUDES,
};
pub use schedule::{bootstrap_schedule, minimal_steps, BootstrapSchedule};
