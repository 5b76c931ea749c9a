use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gp::OneBodySpec;
use crate::potential::{Descriptor, PotentialSpec};
use crate::scattering::Metric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Scatter,
    ScatterMod,
    Born,
    Dyson,
    Schedule,
    Gp,
    Meanfield,
    Hartree,
    Fewbody,
    Pipeline,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Scatter,
        Command::ScatterMod,
        Command::Born,
        Command::Dyson,
        Command::Schedule,
        Command::Gp,
        Command::Meanfield,
        Command::Hartree,
        Command::Fewbody,
        Command::Pipeline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Scatter => "scatter",
            Command::ScatterMod => "scatter-mod",
            Command::Born => "born",
            Command::Dyson => "dyson",
            Command::Schedule => "schedule",
            Command::Gp => "gp",
            Command::Meanfield => "meanfield",
            Command::Hartree => "hartree",
            Command::Fewbody => "fewbody",
            Command::Pipeline => "pipeline",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value given inline, or as a string naming a JSON file that holds it.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Source<T> {
    File(PathBuf),
    Inline(T),
}

impl<'de, T: DeserializeOwned> Deserialize<'de> for Source<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => Ok(Source::File(PathBuf::from(s))),
            other => T::deserialize(other).map(Source::Inline).map_err(D::Error::custom),
        }
    }
}

impl Source<Descriptor> {
    pub fn load(&self, base: &Path) -> Result<PotentialSpec> {
        match self {
            Source::File(p) => PotentialSpec::from_file(base.join(p)),
            Source::Inline(d) => PotentialSpec::with_base_dir(d.clone(), base),
        }
    }
}

impl Source<OneBodySpec> {
    pub fn load(&self, base: &Path) -> Result<OneBodySpec> {
        match self {
            Source::File(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                serde_path_to_error::deserialize(de)
                    .map_err(|e| Error::config(format!("{}: {} at `{}`", path.display(), e.inner(), e.path())))
            }
            Source::Inline(s) => Ok(s.clone()),
        }
    }
}

impl<T> Source<T> {
    pub fn file(&self) -> Option<&Path> {
        match self {
            Source::File(p) => Some(p),
            Source::Inline(_) => None,
        }
    }
}

fn default_tol() -> f64 {
    1e-8
}

fn default_gp_tol() -> f64 {
    1e-10
}

fn default_true() -> bool {
    true
}

fn default_order() -> u32 {
    2
}

fn default_steps() -> usize {
    6
}

fn default_max_iter() -> usize {
    50_000
}

fn default_beta() -> f64 {
    0.5
}

fn default_seed() -> u64 {
    42
}

fn default_observables() -> Vec<Observable> {
    vec![Observable::Rdm1, Observable::Fraction]
}

fn default_pipeline_potential() -> Source<Descriptor> {
    Source::Inline(Descriptor::Gaussian6d { amplitude: 50.0, width: 1.0, cutoff: 1.0 })
}

fn default_pipeline_spec() -> Source<OneBodySpec> {
    Source::Inline(OneBodySpec::harmonic(64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterMethod {
    #[default]
    Grid,
    /// Radial shooting; radial potentials only.
    Radial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterParams {
    pub potential: Source<Descriptor>,
    /// Defaults to four times the support radius.
    #[serde(default)]
    pub domain_radius: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub subsamples: Option<usize>,
    #[serde(default = "default_true")]
    pub extrapolate: bool,
    #[serde(default)]
    pub method: ScatterMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterModParams {
    pub potential: Source<Descriptor>,
    #[serde(default)]
    pub domain_radius: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub subsamples: Option<usize>,
    /// Also solve the direct anisotropic discretization.
    #[serde(default = "default_true")]
    pub cross_check: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BornParams {
    pub potential: Source<Descriptor>,
    #[serde(default = "default_order")]
    pub order: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    #[default]
    Radial,
    Cartesian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DysonConfig {
    pub v: Source<Descriptor>,
    pub u: Source<Descriptor>,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    /// Cells of the discretization.
    pub grid: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default)]
    pub discretization: Discretization,
}

fn default_metric() -> Metric {
    Metric::Standard
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub r0: f64,
    pub beta: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpParams {
    pub spec: Source<OneBodySpec>,
    pub coupling: f64,
    #[serde(default = "default_gp_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Where to write u; next to the output file when absent.
    #[serde(default)]
    pub field_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldParams {
    pub spec: Source<OneBodySpec>,
    /// Exactly one of `potential` and `v_hat_0`.
    #[serde(default)]
    pub potential: Option<Source<Descriptor>>,
    #[serde(default)]
    pub v_hat_0: Option<f64>,
    #[serde(default = "default_gp_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HartreeParams {
    pub spec: Source<OneBodySpec>,
    pub potential: Source<Descriptor>,
    pub particles: u64,
    #[serde(default = "default_gp_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Rdm1,
    Rdm2,
    Fraction,
    Binding,
    Collision,
    Hartree,
}

impl Observable {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "rdm1" => Observable::Rdm1,
            "rdm2" => Observable::Rdm2,
            "fraction" => Observable::Fraction,
            "binding" => Observable::Binding,
            "collision" => Observable::Collision,
            "hartree" => Observable::Hartree,
            _ => return None,
        })
    }
}

/// The one-body spec's `points` is replaced by `lattice`, and its stencil
/// defaults to nearest neighbors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewbodyParams {
    pub lattice: usize,
    pub particles: usize,
    pub spec: Source<OneBodySpec>,
    /// Six-dimensional three-body potential; none means free bosons.
    #[serde(default)]
    pub interaction: Option<Source<Descriptor>>,
    /// The interaction enters as `n^(6 beta - 2) V(n^beta .)`.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// `n` in the scaling above; defaults to `particles`.
    #[serde(default)]
    pub scale_particles: Option<u64>,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default = "default_gp_tol")]
    pub tol: f64,
    /// Radius of the four-body collision indicator; defaults to the spacing.
    #[serde(default)]
    pub collision_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineParams {
    #[serde(default = "default_pipeline_potential")]
    pub potential: Source<Descriptor>,
    #[serde(default = "default_pipeline_spec")]
    pub spec: Source<OneBodySpec>,
    #[serde(default)]
    pub domain_radius: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub cross_check: bool,
    #[serde(default = "default_gp_tol")]
    pub gp_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub field_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Parameters {
    Scatter(ScatterParams),
    ScatterMod(ScatterModParams),
    Born(BornParams),
    Dyson(DysonConfig),
    Schedule(ScheduleParams),
    Gp(GpParams),
    Meanfield(MeanfieldParams),
    Hartree(HartreeParams),
    Fewbody(FewbodyParams),
    Pipeline(PipelineParams),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    #[serde(default)]
    parameters: Option<Value>,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    output_path: Option<PathBuf>,
}

/// A validated run description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub parameters: Parameters,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Directory that relative input paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn located<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        Error::config(format!("{key}: {}", e.inner()))
    })
}

/// Read and validate a JSON run file. Relative paths inside it are taken
/// relative to the file's directory.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: not valid JSON: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    parse_config_value(value, &base)
}

/// Validate a run description given as a JSON value.
pub fn parse_config_value(value: Value, base_dir: &Path) -> Result<RunConfig> {
    if !value.is_object() {
        return Err(Error::config("the configuration must be a JSON object"));
    }
    let raw: RawConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::config(e.inner().to_string())
        } else {
            Error::config(format!("{path}: {}", e.inner()))
        }
    })?;
    let params = raw.parameters.unwrap_or_else(|| Value::Object(Default::default()));
    if !params.is_object() {
        return Err(Error::config("parameters: expected an object"));
    }
    let p = "parameters";
    let parameters = match raw.command {
        Command::Scatter => Parameters::Scatter(located(params, p)?),
        Command::ScatterMod => Parameters::ScatterMod(located(params, p)?),
        Command::Born => Parameters::Born(located(params, p)?),
        Command::Dyson => Parameters::Dyson(located(params, p)?),
        Command::Schedule => Parameters::Schedule(located(params, p)?),
        Command::Gp => Parameters::Gp(located(params, p)?),
        Command::Meanfield => Parameters::Meanfield(located(params, p)?),
        Command::Hartree => Parameters::Hartree(located(params, p)?),
        Command::Fewbody => Parameters::Fewbody(located(params, p)?),
        Command::Pipeline => Parameters::Pipeline(located(params, p)?),
    };
    let cfg = RunConfig {
        command: raw.command,
        parameters,
        seed: raw.seed,
        output_path: raw.output_path,
        base_dir: base_dir.to_path_buf(),
    };
    cfg.check_ranges()?;
    Ok(cfg)
}

fn range(ok: bool, key: &str, msg: impl fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("parameters.{key}: {msg}")))
    }
}

fn positive(x: f64, key: &str) -> Result<()> {
    range(x > 0.0 && x.is_finite(), key, format!("must be positive and finite, got {x}"))
}

fn tolerance(x: f64, key: &str) -> Result<()> {
    range(x > 0.0 && x < 1.0, key, format!("must lie in (0, 1), got {x}"))
}

fn grid_options(domain_radius: Option<f64>, cells: Option<usize>, subsamples: Option<usize>) -> Result<()> {
    if let Some(r) = domain_radius {
        positive(r, "domain_radius")?;
    }
    if let Some(c) = cells {
        range(c >= 2 && c <= 4096, "cells", format!("must lie in 2..=4096, got {c}"))?;
    }
    if let Some(s) = subsamples {
        range((1..=32).contains(&s), "subsamples", format!("must lie in 1..=32, got {s}"))?;
    }
    Ok(())
}

impl RunConfig {
    /// Ranges that do not depend on input files.
    pub fn check_ranges(&self) -> Result<()> {
        match &self.parameters {
            Parameters::Scatter(p) => {
                tolerance(p.tol, "tol")?;
                grid_options(p.domain_radius, p.cells, p.subsamples)?;
                if let (true, Some(c)) = (p.extrapolate, p.cells) {
                    range(c % 2 == 0, "cells", format!("must be even when extrapolating, got {c}"))?;
                }
            }
            Parameters::ScatterMod(p) => {
                tolerance(p.tol, "tol")?;
                grid_options(p.domain_radius, p.cells, p.subsamples)?;
                if let Some(c) = p.cells {
                    range(c % 2 == 0, "cells", format!("must be even, got {c}"))?;
                }
            }
            Parameters::Born(p) => {
                range(p.order == 1 || p.order == 2, "order", format!("must be 1 or 2, got {}", p.order))?;
            }
            Parameters::Dyson(p) => {
                positive(p.r0, "r0")?;
                range(p.r1 > p.r0 && p.r1.is_finite(), "r1", format!("must exceed r0 = {}, got {}", p.r0, p.r1))?;
                range(p.r2 > p.r1 && p.r2.is_finite(), "r2", format!("must exceed r1 = {}, got {}", p.r1, p.r2))?;
                range((2..=4096).contains(&p.grid), "grid", format!("must lie in 2..=4096, got {}", p.grid))?;
                range(
                    !(p.discretization == Discretization::Radial && p.metric == Metric::Modified),
                    "metric",
                    "the radial discretization supports the standard metric only",
                )?;
            }
            Parameters::Schedule(p) => {
                range(p.r0 > 0.0 && p.r0 < 1.0, "r0", format!("must lie in (0, 1), got {}", p.r0))?;
                range(p.beta > 0.0 && p.beta <= 0.375, "beta", format!("must lie in (0, 3/8], got {}", p.beta))?;
                range((1..=64).contains(&p.steps), "steps", format!("must lie in 1..=64, got {}", p.steps))?;
            }
            Parameters::Gp(p) => {
                range(p.coupling >= 0.0 && p.coupling.is_finite(), "coupling", format!("must be >= 0, got {}", p.coupling))?;
                tolerance(p.tol, "tol")?;
                range(p.max_iter >= 1, "max_iter", "must be at least 1")?;
            }
            Parameters::Meanfield(p) => {
                range(
                    p.potential.is_some() != p.v_hat_0.is_some(),
                    "v_hat_0",
                    "give exactly one of `potential` and `v_hat_0`",
                )?;
                if let Some(v) = p.v_hat_0 {
                    range(v >= 0.0 && v.is_finite(), "v_hat_0", format!("must be >= 0, got {v}"))?;
                }
                tolerance(p.tol, "tol")?;
                range(p.max_iter >= 1, "max_iter", "must be at least 1")?;
            }
            Parameters::Hartree(p) => {
                range(p.particles >= 3, "particles", format!("must be at least 3, got {}", p.particles))?;
                tolerance(p.tol, "tol")?;
                range(p.max_iter >= 1, "max_iter", "must be at least 1")?;
            }
            Parameters::Fewbody(p) => {
                range((2..=64).contains(&p.lattice), "lattice", format!("must lie in 2..=64, got {}", p.lattice))?;
                range(
                    (1..=crate::fewbody::MAX_PARTICLES).contains(&p.particles),
                    "particles",
                    format!("must lie in 1..={}, got {}", crate::fewbody::MAX_PARTICLES, p.particles),
                )?;
                range(p.beta > 0.0 && p.beta <= 0.5, "beta", format!("must lie in (0, 1/2], got {}", p.beta))?;
                if let Some(n) = p.scale_particles {
                    range(n >= 1, "scale_particles", "must be at least 1")?;
                }
                tolerance(p.tol, "tol")?;
                if let Some(r) = p.collision_radius {
                    positive(r, "collision_radius")?;
                }
                if p.observables.contains(&Observable::Collision) {
                    range(p.particles == 4, "observables", "collision needs 4 particles")?;
                }
                if p.observables.contains(&Observable::Hartree) {
                    range(p.particles >= 3, "observables", "hartree needs at least 3 particles")?;
                }
            }
            Parameters::Pipeline(p) => {
                tolerance(p.tol, "tol")?;
                tolerance(p.gp_tol, "gp_tol")?;
                grid_options(p.domain_radius, p.cells, None)?;
                if let Some(c) = p.cells {
                    range(c % 2 == 0, "cells", format!("must be even, got {c}"))?;
                }
                range(p.max_iter >= 1, "max_iter", "must be at least 1")?;
            }
        }
        Ok(())
    }

    /// `{command, parameters, seed}` as JSON, the part covered by the
    /// provenance hash.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::json!({
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
        });
        serde_json::to_string(&v).expect("configs serialize")
    }
}
