//! Run configurations, their dispatch to the solvers, and result files.
//!
//! A run file is a JSON object `{command, parameters, seed, output_path}`.
//! Unknown keys anywhere are errors that name the key. Potentials and
//! one-body specs are given inline or as a path to a JSON file.

mod config;
mod run;

pub use config::{
    parse_config, parse_config_value, BornParams, Command, Discretization, DysonConfig, FewbodyParams, GpParams,
    HartreeParams, MeanfieldParams, Observable, Parameters, PipelineParams, RunConfig, ScatterMethod,
    ScatterModParams, ScatterParams, ScheduleParams, Source,
};
pub use run::{run, write_outputs, FieldArtifact, Report, Table};

#[cfg(test)]
mod tests;
