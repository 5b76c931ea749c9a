use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use gpscatter::io::{parse_config, parse_config_value, run, write_outputs, Report, RunConfig};
use gpscatter::Error;

#[derive(Parser)]
#[command(name = "gpscatter", version, about = "Scattering energies, Dyson gaps, Gross-Pitaevskii minima and few-body checks")]
struct Cli {
    /// Also write the tabular part of the result (or key,value pairs) as CSV.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = "GPSCATTER_THREADS", value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Output JSON file; printed to stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    #[value(alias = "standard")]
    Std,
    #[value(alias = "modified")]
    Mod,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Grid,
    Radial,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiscretizationArg {
    Radial,
    Cartesian,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a JSON run file.
    Run {
        config: PathBuf,
        /// Overrides the file's output_path.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Zero-energy scattering energy b(v).
    Scatter {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        domain_radius: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        subsamples: Option<usize>,
        #[arg(long)]
        no_extrapolate: bool,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Modified scattering energy b_M(V) of a six-dimensional potential.
    ScatterMod {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        domain_radius: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        subsamples: Option<usize>,
        /// Skip the direct anisotropic solve.
        #[arg(long)]
        no_cross_check: bool,
        #[command(flatten)]
        common: Common,
    },
    /// First or second Born approximation.
    Born {
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        order: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Largest Dyson coupling c*.
    Dyson {
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
        #[arg(long, value_name = "N")]
        grid: usize,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long, value_enum)]
        discretization: Option<DiscretizationArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Bootstrap sequence R_j, M_j.
    Schedule {
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Gross-Pitaevskii minimizer for a fixed coupling.
    Gp {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        coupling: f64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// GPS1 file for u; next to --out when absent.
        #[arg(long, value_name = "PATH")]
        field: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// GP minimum with the first Born coupling int V.
    Meanfield {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, conflicts_with = "v_hat_0", required_unless_present = "v_hat_0")]
        potential: Option<PathBuf>,
        #[arg(long)]
        v_hat_0: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Hartree energy per particle of n bosons.
    Hartree {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        potential: PathBuf,
        #[arg(long)]
        particles: u64,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact ground state of a few bosons on an L^3 lattice.
    Fewbody {
        #[arg(long, value_name = "L")]
        lattice: usize,
        #[arg(long)]
        particles: usize,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        interaction: Option<PathBuf>,
        /// Comma-separated: rdm1, rdm2, fraction, binding, collision, hartree.
        #[arg(long, value_delimiter = ',')]
        observables: Option<Vec<String>>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        collision_radius: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// V -> b_M(V) -> GP minimum with coupling b_M / 6.
    Pipeline {
        #[arg(long)]
        potential: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        domain_radius: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        cross_check: bool,
        #[arg(long)]
        gp_tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

/// Collects only the flags that were given, so defaults stay with the
/// configuration layer.
#[derive(Default)]
struct Params(Map<String, Value>);

impl Params {
    fn set(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.0.insert(key.into(), v.into());
        self
    }

    fn opt<T: Into<Value>>(self, key: &str, v: Option<T>) -> Self {
        match v {
            Some(v) => self.set(key, v),
            None => self,
        }
    }

    fn path(self, key: &str, p: &Path) -> Self {
        self.set(key, p.display().to_string())
    }

    fn opt_path(self, key: &str, p: &Option<PathBuf>) -> Self {
        match p {
            Some(p) => self.path(key, p),
            None => self,
        }
    }
}

fn flags_config(command: &str, params: Params, common: &Common) -> Result<RunConfig, Error> {
    let mut v = json!({ "command": command, "parameters": Value::Object(params.0) });
    if let Some(s) = common.seed {
        v["seed"] = json!(s);
    }
    if let Some(o) = &common.out {
        v["output_path"] = json!(o.display().to_string());
    }
    parse_config_value(v, Path::new("."))
}

fn build_config(cmd: &Cmd) -> Result<RunConfig, Error> {
    match cmd {
        Cmd::Run { config, out } => {
            let mut cfg = parse_config(config)?;
            if let Some(o) = out {
                // Relative to the working directory, unlike paths in the file.
                cfg.output_path = Some(std::env::current_dir().map_err(|e| Error::io(".", e))?.join(o));
            }
            Ok(cfg)
        }
        Cmd::Scatter { potential, domain_radius, tol, cells, subsamples, no_extrapolate, method, common } => {
            let p = Params::default()
                .path("potential", potential)
                .opt("domain_radius", *domain_radius)
                .opt("tol", *tol)
                .opt("cells", *cells)
                .opt("subsamples", *subsamples)
                .set("extrapolate", !no_extrapolate)
                .opt(
                    "method",
                    method.map(|m| match m {
                        MethodArg::Grid => "grid",
                        MethodArg::Radial => "radial",
                    }),
                );
            flags_config("scatter", p, common)
        }
        Cmd::ScatterMod { potential, domain_radius, tol, cells, subsamples, no_cross_check, common } => {
            let p = Params::default()
                .path("potential", potential)
                .opt("domain_radius", *domain_radius)
                .opt("tol", *tol)
                .opt("cells", *cells)
                .opt("subsamples", *subsamples)
                .set("cross_check", !no_cross_check);
            flags_config("scatter-mod", p, common)
        }
        Cmd::Born { potential, order, common } => {
            flags_config("born", Params::default().path("potential", potential).opt("order", *order), common)
        }
        Cmd::Dyson { v, u, r0, r1, r2, grid, metric, discretization, common } => {
            let p = Params::default()
                .path("v", v)
                .path("u", u)
                .set("r0", *r0)
                .set("r1", *r1)
                .set("r2", *r2)
                .set("grid", *grid)
                .opt(
                    "metric",
                    metric.map(|m| match m {
                        MetricArg::Std => "standard",
                        MetricArg::Mod => "modified",
                    }),
                )
                .opt(
                    "discretization",
                    discretization.map(|d| match d {
                        DiscretizationArg::Radial => "radial",
                        DiscretizationArg::Cartesian => "cartesian",
                    }),
                );
            flags_config("dyson", p, common)
        }
        Cmd::Schedule { r0, beta, steps, common } => {
            let p = Params::default().set("r0", *r0).set("beta", *beta).opt("steps", *steps);
            flags_config("schedule", p, common)
        }
        Cmd::Gp { spec, coupling, tol, max_iter, field, common } => {
            let p = Params::default()
                .path("spec", spec)
                .set("coupling", *coupling)
                .opt("tol", *tol)
                .opt("max_iter", *max_iter)
                .opt_path("field_path", field);
            flags_config("gp", p, common)
        }
        Cmd::Meanfield { spec, potential, v_hat_0, tol, common } => {
            let p = Params::default()
                .path("spec", spec)
                .opt_path("potential", potential)
                .opt("v_hat_0", *v_hat_0)
                .opt("tol", *tol);
            flags_config("meanfield", p, common)
        }
        Cmd::Hartree { spec, potential, particles, tol, common } => {
            let p = Params::default()
                .path("spec", spec)
                .path("potential", potential)
                .set("particles", *particles)
                .opt("tol", *tol);
            flags_config("hartree", p, common)
        }
        Cmd::Fewbody {
            lattice,
            particles,
            spec,
            interaction,
            observables,
            beta,
            tol,
            collision_radius,
            common,
        } => {
            let p = Params::default()
                .set("lattice", *lattice)
                .set("particles", *particles)
                .path("spec", spec)
                .opt_path("interaction", interaction)
                .opt("observables", observables.clone())
                .opt("beta", *beta)
                .opt("tol", *tol)
                .opt("collision_radius", *collision_radius);
            flags_config("fewbody", p, common)
        }
        Cmd::Pipeline { potential, spec, domain_radius, tol, cells, cross_check, gp_tol, common } => {
            let p = Params::default()
                .opt_path("potential", potential)
                .opt_path("spec", spec)
                .opt("domain_radius", *domain_radius)
                .opt("tol", *tol)
                .opt("cells", *cells)
                .set("cross_check", *cross_check)
                .opt("gp_tol", *gp_tol);
            flags_config("pipeline", p, common)
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        _ => {}
    }
}

fn write_csv(path: &Path, report: &Report) -> Result<(), Error> {
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    match &report.table {
        Some(t) => {
            w.write_record(&t.columns).map_err(io)?;
            for row in &t.rows {
                w.write_record(row.iter().map(|x| x.to_string())).map_err(io)?;
            }
        }
        None => {
            let mut pairs = Vec::new();
            flatten("", &report.body["result"], &mut pairs);
            w.write_record(["key", "value"]).map_err(io)?;
            for (k, v) in pairs {
                w.write_record([k, v]).map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("GPSCATTER_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    let cfg = build_config(&cli.command)?;
    let report = run(&cfg)?;
    write_outputs(&report, &cfg)?;
    if cfg.output_path.is_none() {
        print!("{}", report.to_json());
    }
    if let Some(path) = &cli.csv {
        write_csv(path, &report)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
