use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::config::*;
use crate::dyson::{bootstrap_schedule, dyson_gap, DysonGrid, DysonParams};
use crate::error::{Error, Result};
use crate::fewbody::{
    build_system, condensate_fraction, four_body_collision, ground_state, reduced_density_matrix, BindingReport,
    ThreeBodyWeights,
};
use crate::geometry::{check_three_body_symmetry, metric_matrix};
use crate::gp::{hartree_interaction, minimize_gp_with, one_body_energy, GPState, GpOptions, OneBody, Stencil};
use crate::gridfile::{self, GridHeader};
use crate::potential::{Descriptor, PotentialSpec};
use crate::scattering::{
    born_series, scale_potential, scattering_energy_modified_with, solve_scattering_radial, solve_scattering_with,
    Metric, Samples, ScatteringOptions,
};

/// Regular numeric columns for external plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// A complex grid function to be written as a GPS1 file.
#[derive(Clone, Debug)]
pub struct FieldArtifact {
    pub path: PathBuf,
    pub header: GridHeader,
    pub data: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: Command,
    /// The JSON result, including its provenance block.
    pub body: Value,
    pub table: Option<Table>,
    pub fields: Vec<FieldArtifact>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.body).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, Serialize)]
struct InputHash {
    key: String,
    path: String,
    sha256: String,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn grid_files(d: &Descriptor, out: &mut Vec<String>) {
    match d {
        Descriptor::Grid { data_file, .. } => out.push(data_file.clone()),
        Descriptor::Scaled { inner, .. } | Descriptor::BlockLinear { inner, .. } | Descriptor::Symmetrized { inner } => {
            grid_files(inner, out)
        }
        _ => {}
    }
}

/// Hashes of every file a run reads.
struct Inputs<'a> {
    base: &'a Path,
    list: Vec<InputHash>,
}

impl<'a> Inputs<'a> {
    fn new(base: &'a Path) -> Self {
        Inputs { base, list: Vec::new() }
    }

    fn file(&mut self, key: &str, rel: &Path) -> Result<()> {
        let sha256 = sha256_file(&self.base.join(rel))?;
        self.list.push(InputHash { key: key.to_string(), path: rel.display().to_string(), sha256 });
        Ok(())
    }

    fn potential(&mut self, key: &str, src: &Source<Descriptor>) -> Result<PotentialSpec> {
        let v = src.load(self.base).map_err(|e| e.in_stage(format!("loading parameters.{key}")))?;
        let dir = match src.file() {
            Some(p) => {
                self.file(key, p)?;
                p.parent().map(Path::to_path_buf).unwrap_or_default()
            }
            None => PathBuf::new(),
        };
        let mut data = Vec::new();
        grid_files(&v.descriptor, &mut data);
        for f in data {
            self.file(&format!("{key}.data_file"), &dir.join(f))?;
        }
        Ok(v)
    }

    fn spec(&mut self, key: &str, src: &Source<crate::gp::OneBodySpec>) -> Result<crate::gp::OneBodySpec> {
        let s = src.load(self.base)?;
        if let Some(p) = src.file() {
            self.file(key, p)?;
        }
        Ok(s)
    }
}

fn config_error(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::config(format!("parameters.{key}: {msg}"))
}

fn six_dimensional(v: &PotentialSpec, key: &str) -> Result<()> {
    if v.dim != 6 {
        return Err(config_error(key, format!("must be a six-dimensional potential, got dimension {}", v.dim)));
    }
    Ok(())
}

fn domain_radius(v: &PotentialSpec, given: Option<f64>) -> Result<f64> {
    let min = 4.0 * v.support_radius;
    match given {
        Some(r) if r < min => Err(config_error("domain_radius", format!("must be at least 4 R0 = {min}, got {r}"))),
        Some(r) => Ok(r),
        None if min > 0.0 => Ok(min),
        None => Ok(1.0),
    }
}

fn to_value(x: impl Serialize) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    base.join(p)
}

/// `state.json` -> `state.u.gps1`.
fn field_path_for(cfg: &RunConfig, given: &Option<PathBuf>) -> Option<PathBuf> {
    if let Some(p) = given {
        return Some(resolve(&cfg.base_dir, p));
    }
    cfg.output_path.as_ref().map(|o| resolve(&cfg.base_dir, &o.with_extension("u.gps1")))
}

fn gp_field(path: Option<PathBuf>, st: &GPState) -> Vec<FieldArtifact> {
    match path {
        Some(path) => vec![FieldArtifact {
            path,
            header: GridHeader { dim: 3, n: st.grid.points, spacing: st.grid.spacing },
            data: st.u.clone(),
        }],
        None => Vec::new(),
    }
}

fn gp_body(st: &GPState) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("e_gp".into(), json!(st.e_gp));
    m.insert("eps0".into(), json!(st.eps0));
    m.insert("residual".into(), json!(st.el_residual));
    m.insert("gradient_norm".into(), json!(st.gradient_norm));
    m.insert("iterations".into(), json!(st.iterations));
    m.insert("coupling".into(), json!(st.coupling));
    m.insert("grid".into(), to_value(&st.grid));
    m
}

fn history_table(st: &GPState) -> Table {
    Table {
        columns: vec!["iteration".into(), "energy".into()],
        rows: st.energy_history.iter().enumerate().map(|(i, e)| vec![(i + 1) as f64, *e]).collect(),
    }
}

fn minimize(op: &OneBody, coupling: f64, tol: f64, max_iter: usize, seed: u64) -> Result<GPState> {
    let mut opts = GpOptions::new(tol, seed);
    opts.max_iter = max_iter;
    minimize_gp_with(op, coupling, &opts)
}

struct Outcome {
    body: Map<String, Value>,
    table: Option<Table>,
    fields: Vec<FieldArtifact>,
}

impl Outcome {
    fn body(body: Map<String, Value>) -> Self {
        Outcome { body, table: None, fields: Vec::new() }
    }
}

/// Execute a validated configuration. Nothing is written to disk.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let mut inputs = Inputs::new(&cfg.base_dir);
    let out = match &cfg.parameters {
        Parameters::Scatter(p) => run_scatter(p, &mut inputs)?,
        Parameters::ScatterMod(p) => run_scatter_mod(p, &mut inputs)?,
        Parameters::Born(p) => {
            let v = inputs.potential("potential", &p.potential)?;
            let mut m = Map::new();
            m.insert("order".into(), json!(p.order));
            m.insert("value".into(), json!(born_series(&v, p.order)?));
            m.insert("first_born".into(), json!(born_series(&v, 1)?));
            Outcome::body(m)
        }
        Parameters::Dyson(p) => {
            let v = inputs.potential("v", &p.v)?;
            let u = inputs.potential("u", &p.u)?;
            let grid = match p.discretization {
                Discretization::Radial => DysonGrid::Radial { cells: p.grid },
                Discretization::Cartesian => DysonGrid::Cartesian { cells: p.grid },
            };
            let rep = dyson_gap(&v, &u, DysonParams { r0: p.r0, r1: p.r1, r2: p.r2 }, grid, p.metric)?;
            let body = match to_value(&rep) {
                Value::Object(m) => m,
                _ => unreachable!(),
            };
            Outcome::body(body)
        }
        Parameters::Schedule(p) => {
            let s = bootstrap_schedule(p.r0, p.beta, p.steps)?;
            let rows = (1..=p.steps)
                .map(|j| vec![j as f64, s.r_sequence[j], s.m_sequence[j - 1], s.constraints_ok[j - 1] as u8 as f64])
                .collect();
            let mut body = match to_value(&s) {
                Value::Object(m) => m,
                _ => unreachable!(),
            };
            body.insert("all_constraints_ok".into(), json!(s.constraints_ok.iter().all(|&b| b)));
            Outcome {
                body,
                table: Some(Table { columns: vec!["j".into(), "r_j".into(), "m_j".into(), "constraint_ok".into()], rows }),
                fields: Vec::new(),
            }
        }
        Parameters::Gp(p) => {
            let spec = inputs.spec("spec", &p.spec)?;
            let op = spec.build().map_err(|e| e.in_stage("one-body operator"))?;
            let st = minimize(&op, p.coupling, p.tol, p.max_iter, cfg.seed)?;
            let path = field_path_for(cfg, &p.field_path);
            let mut body = gp_body(&st);
            body.insert("field_path".into(), json!(path.as_ref().map(|x| x.display().to_string())));
            Outcome { body, table: Some(history_table(&st)), fields: gp_field(path, &st) }
        }
        Parameters::Meanfield(p) => {
            let spec = inputs.spec("spec", &p.spec)?;
            let v_hat_0 = match (&p.potential, p.v_hat_0) {
                (_, Some(x)) => x,
                (Some(src), None) => {
                    let v = inputs.potential("potential", src)?;
                    born_series(&v, 1)?
                }
                (None, None) => unreachable!("checked at parse time"),
            };
            let op = spec.build().map_err(|e| e.in_stage("one-body operator"))?;
            let st = minimize(&op, v_hat_0 / 6.0, p.tol, p.max_iter, cfg.seed)?;
            let mut body = gp_body(&st);
            body.insert("v_hat_0".into(), json!(v_hat_0));
            body.insert("e_mf".into(), json!(st.e_gp));
            Outcome { body, table: Some(history_table(&st)), fields: Vec::new() }
        }
        Parameters::Hartree(p) => {
            let spec = inputs.spec("spec", &p.spec)?;
            let v = inputs.potential("potential", &p.potential)?;
            six_dimensional(&v, "potential")?;
            let op = spec.build().map_err(|e| e.in_stage("one-body operator"))?;
            let n = p.particles;
            let (w, total) = if v.is_zero() {
                (ThreeBodyWeights::zero(op.spacing()), 0.0)
            } else {
                let vn = scale_potential(&v, n, 0.5)?;
                let w = ThreeBodyWeights::hat_averaged(&vn, op.spacing())?;
                let t = w.total();
                (w, t)
            };
            let nf = n as f64;
            let coupling = (nf - 1.0) * (nf - 2.0) / 6.0 * total;
            let st = minimize(&op, coupling, p.tol, p.max_iter, cfg.seed).map_err(|e| e.in_stage("trial state"))?;
            let kinetic = one_body_energy(&st.u, &op)?;
            let interaction = hartree_interaction(&st.u, &op, &w, n);
            let mut m = Map::new();
            m.insert("particles".into(), json!(n));
            m.insert("hartree_energy".into(), json!(kinetic + interaction));
            m.insert("one_body_energy".into(), json!(kinetic));
            m.insert("interaction".into(), json!(interaction));
            m.insert("local_coupling".into(), json!(coupling));
            m.insert("trial_residual".into(), json!(st.el_residual));
            m.insert("grid".into(), to_value(&st.grid));
            Outcome::body(m)
        }
        Parameters::Fewbody(p) => run_fewbody(p, cfg.seed, &mut inputs)?,
        Parameters::Pipeline(p) => run_pipeline(p, cfg, &mut inputs)?,
    };
    let mut body = Map::new();
    body.insert("command".into(), json!(cfg.command));
    body.insert("seed".into(), json!(cfg.seed));
    body.insert("result".into(), Value::Object(out.body));
    body.insert(
        "provenance".into(),
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": hex::encode(Sha256::digest(cfg.canonical_json().as_bytes())),
            "inputs": inputs.list,
            "seed": cfg.seed,
        }),
    );
    Ok(Report { command: cfg.command, body: Value::Object(body), table: out.table, fields: out.fields })
}

fn scatter_options(dim: usize, cells: Option<usize>, subsamples: Option<usize>) -> ScatteringOptions {
    let mut opts = ScatteringOptions::for_dim(dim);
    if let Some(c) = cells {
        opts.cells = c;
    }
    if let Some(s) = subsamples {
        opts.subsamples = s;
    }
    opts
}

fn run_scatter(p: &ScatterParams, inputs: &mut Inputs) -> Result<Outcome> {
    let v = inputs.potential("potential", &p.potential)?;
    let radius = domain_radius(&v, p.domain_radius)?;
    let sol = match p.method {
        ScatterMethod::Radial => {
            if !v.is_radial() {
                return Err(config_error("method", "radial shooting needs a radial potential"));
            }
            solve_scattering_radial(&v, radius, p.tol)?
        }
        ScatterMethod::Grid => {
            let mut opts = scatter_options(v.dim, p.cells, p.subsamples);
            opts.extrapolate = p.extrapolate;
            solve_scattering_with(&v, radius, p.tol, &opts)?
        }
    };
    let mut m = Map::new();
    m.insert("b".into(), json!(sol.b));
    m.insert("b_grid".into(), json!(sol.b_grid));
    m.insert("residual".into(), json!(sol.residual));
    m.insert("f_min".into(), json!(sol.f_min));
    m.insert("decay_fit".into(), to_value(sol.decay_constants));
    m.insert("grid".into(), to_value(&sol.grid));
    m.insert("domain_radii_used".into(), json!(sol.domain_radii_used));
    m.insert("extrapolated".into(), json!(sol.extrapolated));
    m.insert("iterations".into(), json!(sol.iterations));
    let table = match &sol.samples {
        Samples::Radial { radii, derivative } => Some(Table {
            columns: vec!["r".into(), "omega".into(), "omega_prime".into()],
            rows: radii.iter().zip(&sol.omega).zip(derivative).map(|((r, w), d)| vec![*r, *w, *d]).collect(),
        }),
        Samples::Ball(_) => None,
    };
    Ok(Outcome { body: m, table, fields: Vec::new() })
}

fn run_scatter_mod(p: &ScatterModParams, inputs: &mut Inputs) -> Result<Outcome> {
    let v = inputs.potential("potential", &p.potential)?;
    six_dimensional(&v, "potential")?;
    let radius = domain_radius(&v, p.domain_radius)?;
    let opts = scatter_options(6, p.cells, p.subsamples);
    let mut m = Map::new();
    if p.cross_check {
        let r = scattering_energy_modified_with(&v, radius, p.tol, &opts)?;
        m.insert("b_m".into(), json!(r.b_m));
        m.insert("cross_check".into(), json!(r.cross_check));
        m.insert("relative_difference".into(), json!(r.relative_difference));
    } else {
        let (b_m, residual) = modified_energy(&v, radius, p.tol, &opts)?;
        m.insert("b_m".into(), json!(b_m));
        m.insert("residual".into(), json!(residual));
    }
    m.insert("int_v".into(), json!(born_series(&v, 1)?));
    m.insert("domain_radius".into(), json!(radius));
    m.insert("cells".into(), json!(opts.cells));
    Ok(Outcome::body(m))
}

/// det M b(V(M .)) and the relative residual of the linear solve.
fn modified_energy(v: &PotentialSpec, radius: f64, tol: f64, opts: &ScatteringOptions) -> Result<(f64, f64)> {
    if v.is_zero() {
        return Ok((0.0, 0.0));
    }
    let sym = check_three_body_symmetry(v, 1e-10)?;
    if !sym.pass {
        return Err(Error::precondition("potential is not invariant under the three-body symmetry group"));
    }
    let mg = metric_matrix();
    let w = v.linear(mg.m)?;
    let ratio = w.support_radius / v.support_radius;
    let std_opts = ScatteringOptions { metric: Metric::Standard, ..opts.clone() };
    let sol = solve_scattering_with(&w, radius * ratio, tol, &std_opts)?;
    Ok((sol.b * mg.det_m, sol.residual))
}

fn run_fewbody(p: &FewbodyParams, seed: u64, inputs: &mut Inputs) -> Result<Outcome> {
    let mut spec = inputs.spec("spec", &p.spec)?;
    spec.points = p.lattice;
    let op = spec.build_with_default(Stencil::Second).map_err(|e| e.in_stage("one-body operator"))?;
    let h = op.spacing();
    let n = p.particles;
    let w = match &p.interaction {
        None => ThreeBodyWeights::zero(h),
        Some(src) => {
            let v = inputs.potential("interaction", src)?;
            six_dimensional(&v, "interaction")?;
            let vn = scale_potential(&v, p.scale_particles.unwrap_or(n as u64), p.beta)?;
            ThreeBodyWeights::hat_averaged(&vn, h).map_err(|e| e.in_stage("interaction weights"))?
        }
    };
    let sys = build_system(op.clone(), n, w.clone())?;
    let gs = ground_state(&sys, p.tol).map_err(|e| e.in_stage("ground state"))?;
    let mut obs = Map::new();
    let mut table = None;
    let wants = |o: Observable| p.observables.contains(&o);
    if wants(Observable::Rdm1) || wants(Observable::Fraction) {
        let g1 = reduced_density_matrix(&sys, &gs.vectors, 1)?;
        if wants(Observable::Rdm1) {
            obs.insert("rdm1".into(), to_value(g1.summary()));
        }
        if wants(Observable::Fraction) {
            obs.insert("fraction".into(), json!(condensate_fraction(&g1)?));
        }
    }
    if wants(Observable::Rdm2) {
        let g2 = reduced_density_matrix(&sys, &gs.vectors, 2)?;
        obs.insert("rdm2".into(), to_value(g2.summary()));
    }
    if wants(Observable::Binding) {
        let mut energies = Vec::with_capacity(n);
        for m in 1..n {
            let s = build_system(op.clone(), m, w.clone())?;
            energies.push(ground_state(&s, p.tol).map_err(|e| e.in_stage(format!("binding, {m} particles")))?.energy);
        }
        energies.push(gs.energy);
        let increments: Vec<f64> = energies.windows(2).map(|x| x[1] - x[0]).collect();
        let pass = increments.iter().all(|&d| d >= 0.0);
        table = Some(Table {
            columns: vec!["particles".into(), "energy".into()],
            rows: energies.iter().enumerate().map(|(i, e)| vec![(i + 1) as f64, *e]).collect(),
        });
        obs.insert("binding".into(), to_value(BindingReport { energies, increments, pass }));
    }
    if wants(Observable::Collision) {
        let r = p.collision_radius.unwrap_or(h);
        obs.insert("collision".into(), json!({ "radius": r, "value": four_body_collision(&sys, &gs.vectors, r)? }));
    }
    if wants(Observable::Hartree) {
        let nf = n as f64;
        let coupling = (nf - 1.0) * (nf - 2.0) / 6.0 * w.total();
        let st = minimize(&op, coupling, p.tol.max(1e-12), 50_000, seed).map_err(|e| e.in_stage("hartree state"))?;
        let e = one_body_energy(&st.u, &op)? + hartree_interaction(&st.u, &op, &w, n as u64);
        let per_particle = gs.energy / nf;
        obs.insert(
            "hartree".into(),
            json!({ "energy_per_particle": e, "ground_per_particle": per_particle, "upper_bound_holds": e >= per_particle }),
        );
    }
    let mut m = Map::new();
    m.insert("lattice".into(), json!(p.lattice));
    m.insert("particles".into(), json!(n));
    m.insert("spacing".into(), json!(h));
    m.insert("half_width".into(), json!(op.half_width));
    m.insert("stencil".into(), to_value(op.stencil));
    m.insert("dim".into(), json!(sys.dim()));
    m.insert("interaction_weights".into(), json!(w.entries.len()));
    m.insert("interaction_total".into(), json!(w.total()));
    m.insert("ground_state".into(), to_value(&gs));
    m.insert("observables".into(), Value::Object(obs));
    Ok(Outcome { body: m, table, fields: Vec::new() })
}

/// V -> b_M(V) -> coupling b_M / 6 -> GP minimum.
fn run_pipeline(p: &PipelineParams, cfg: &RunConfig, inputs: &mut Inputs) -> Result<Outcome> {
    let v = inputs.potential("potential", &p.potential)?;
    six_dimensional(&v, "potential")?;
    let spec = inputs.spec("spec", &p.spec)?;
    let radius = domain_radius(&v, p.domain_radius)?;
    let opts = scatter_options(6, p.cells, None);
    let (b_m, scattering_residual) =
        modified_energy(&v, radius, p.tol, &opts).map_err(|e| e.in_stage("scattering"))?;
    let cross = if p.cross_check && !v.is_zero() {
        let direct = ScatteringOptions { metric: Metric::Modified, ..opts.clone() };
        Some(solve_scattering_with(&v, radius, p.tol, &direct).map_err(|e| e.in_stage("scattering cross-check"))?.b)
    } else {
        None
    };
    let int_v = born_series(&v, 1).map_err(|e| e.in_stage("first Born"))?;
    let op = spec.build().map_err(|e| e.in_stage("one-body operator"))?;
    let st = minimize(&op, b_m / 6.0, p.gp_tol, p.max_iter, cfg.seed).map_err(|e| e.in_stage("gp"))?;
    let path = field_path_for(cfg, &p.field_path);
    let mut m = Map::new();
    m.insert("b_m".into(), json!(b_m));
    m.insert("b_m_cross_check".into(), json!(cross));
    m.insert("int_v".into(), json!(int_v));
    m.insert("coupling".into(), json!(st.coupling));
    m.insert("e_gp".into(), json!(st.e_gp));
    m.insert("eps0".into(), json!(st.eps0));
    m.insert(
        "residuals".into(),
        json!({
            "scattering": scattering_residual,
            "euler_lagrange": st.el_residual,
            "gradient_norm": st.gradient_norm,
        }),
    );
    m.insert("iterations".into(), json!(st.iterations));
    m.insert("grid".into(), to_value(&st.grid));
    m.insert("scattering_cells".into(), json!(opts.cells));
    m.insert("domain_radius".into(), json!(radius));
    m.insert("field_path".into(), json!(path.as_ref().map(|x| x.display().to_string())));
    Ok(Outcome { body: m, table: None, fields: gp_field(path, &st) })
}

/// Write the JSON report to `output_path` (when set) and every field file.
pub fn write_outputs(report: &Report, cfg: &RunConfig) -> Result<()> {
    if let Some(out) = &cfg.output_path {
        let path = resolve(&cfg.base_dir, out);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
    }
    for f in &report.fields {
        gridfile::write_complex(&f.path, &f.header, &f.data)?;
    }
    Ok(())
}
