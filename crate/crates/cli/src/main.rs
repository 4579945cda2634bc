mod audit;
mod config;
mod error;
mod output;
mod specs;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use specgeom_core::eigen::EigenOptions;
use specgeom_core::experiments::hersch::spectrum;
use specgeom_core::experiments::report::sig12;
use specgeom_core::experiments::StabilityReport;
use specgeom_core::measure::{MeasureFile, Normalization};
use specgeom_core::mesh::mesh_from_spec;
use specgeom_core::moebius::{hersch_balance, nadirashvili_balance};

use audit::Experiment;
use config::RunConfig;
use error::{CliError, CliResult};
use output::Outputs;
use specs::measure_from_spec;

/// Environment variable holding the solver thread count (ignored under --deterministic).
pub const THREADS_ENV: &str = "SPECGEOM_THREADS";

#[derive(Parser)]
#[command(name = "specgeom", version, about = "Laplace eigenvalues of measures on surfaces and stability audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of (K, M_μ) and the normalized λ̄_k.
    Eig,
    /// Möbius-balance a sphere measure (k = 1 Hersch, k = 2 two-moment).
    Balance,
    /// Run one or more registered experiments concurrently.
    Audit {
        #[arg(required = true, value_enum)]
        experiments: Vec<Experiment>,
    },
    /// Turn saved reports into flat CSV files for plotting.
    Plotdata { reports: Vec<PathBuf> },
    /// Write a mesh file.
    MeshGen,
    /// Write a measure file.
    MeasureGen,
}

/// Settings shared by all commands; each may also come from `--config`.
#[derive(Args, Default)]
struct Opts {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single-threaded solves: reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    /// icosphere:<s>, icosphere-unit:<s>, torus:<c>,<d>:<n>, square:<n>, equilateral:<n>, or a mesh file.
    #[arg(long, global = true)]
    mesh: Option<String>,
    #[arg(long = "coarse-mesh", global = true)]
    coarse_mesh: Option<String>,
    #[arg(long = "cap-mesh", global = true)]
    cap_mesh: Option<String>,
    /// uniform, hersch:<i>, cap:<eps>:<M>, bubble:<t>, atom:<vertex>:<weight>, or a measure file.
    #[arg(long, global = true)]
    measure: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    /// Relative eigen-residual tolerance.
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Comma-separated cap radii.
    #[arg(long, global = true, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long = "cap-eps", global = true)]
    cap_eps: Option<String>,
    #[arg(long, global = true)]
    small: Option<String>,
    #[arg(long, global = true)]
    large: Option<String>,
    /// prop72_restricted or prop72_generic.
    #[arg(long, global = true)]
    kind: Option<String>,
    #[arg(long, global = true)]
    amplitudes: Option<String>,
    #[arg(long, global = true)]
    map: Option<String>,
    #[arg(long, global = true)]
    level: Option<String>,
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true)]
    ts: Option<String>,
    #[arg(long, global = true)]
    fractions: Option<String>,
    #[arg(long, global = true)]
    vertex: Option<String>,
    /// none or unit-mass.
    #[arg(long, global = true)]
    normalization: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<String>,
}

impl Opts {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("mesh", &self.mesh),
            ("coarse-mesh", &self.coarse_mesh),
            ("cap-mesh", &self.cap_mesh),
            ("measure", &self.measure),
            ("k", &self.k),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("eps", &self.eps),
            ("cap-eps", &self.cap_eps),
            ("small", &self.small),
            ("large", &self.large),
            ("kind", &self.kind),
            ("amplitudes", &self.amplitudes),
            ("map", &self.map),
            ("level", &self.level),
            ("family", &self.family),
            ("ts", &self.ts),
            ("fractions", &self.fractions),
            ("vertex", &self.vertex),
            ("normalization", &self.normalization),
            ("out", &self.out),
            ("out-dir", &self.out_dir),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect()
    }

    fn resolve(&self, command: &str, defaults: &[(&str, &str)]) -> CliResult<RunConfig> {
        let mut all = vec![("tol", "1e-8"), ("seed", "24301")];
        all.extend_from_slice(defaults);
        RunConfig::resolve(command, self.config.as_deref(), self.flags(), &all)
    }
}

fn eigen_options(cfg: &RunConfig) -> CliResult<EigenOptions> {
    Ok(EigenOptions { tol: cfg.require("tol")?, seed: cfg.require("seed")?, ..EigenOptions::default() })
}

/// Thread count: 1 under --deterministic, else the environment variable, else all cores.
fn configure_threads(deterministic: bool) -> CliResult<usize> {
    let threads = if deterministic {
        1
    } else {
        match std::env::var(THREADS_ENV) {
            Ok(s) => s.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV} = `{s}` is not a thread count")))?,
            Err(_) => 0,
        }
    };
    specgeom_core::set_threads(Some(threads).filter(|t| *t > 0));
    Ok(threads)
}

#[derive(Serialize)]
struct EigOutput {
    mesh: String,
    measure: String,
    vertices: usize,
    mass: f64,
    eigenvalues: Vec<f64>,
    normalized: Vec<f64>,
    residuals: Vec<f64>,
}

fn cmd_eig(cfg: &RunConfig, out: &mut Outputs) -> CliResult<bool> {
    let mesh_spec: String = cfg.require("mesh")?;
    let mesh = mesh_from_spec(&mesh_spec)?;
    let mut mu = measure_from_spec(&cfg.require::<String>("measure")?, &mesh)?;
    match cfg.require::<String>("normalization")?.as_str() {
        "none" => {}
        "unit-mass" => mu = mu.normalized_unit_mass(&mesh)?,
        other => return Err(CliError::Usage(format!("unknown normalization `{other}` (none, unit-mass)"))),
    }
    let r = spectrum(&mesh, &mu, cfg.require("k")?, &eigen_options(cfg)?)?;
    let normalized: Vec<f64> = r.eigenvalues.iter().map(|l| sig12(l * r.mass)).collect();
    out.say(format!("{:>3} {:>20} {:>20} {:>12}", "k", "lambda", "lambda_bar", "residual"));
    for (i, l) in r.eigenvalues.iter().enumerate() {
        out.say(format!("{i:>3} {:>20} {:>20} {:>12.3e}", output::fmt12(*l), output::fmt12(normalized[i]), r.residuals[i]));
    }
    let result = EigOutput {
        mesh: mesh_spec,
        measure: cfg.require("measure")?,
        vertices: mesh.n_vertices(),
        mass: sig12(r.mass),
        eigenvalues: r.eigenvalues.iter().map(|x| sig12(*x)).collect(),
        normalized,
        residuals: r.residuals.iter().map(|x| sig12(*x)).collect(),
    };
    out.write_json(&out.target(cfg, "eig.json"), &result)?;
    Ok(true)
}

#[derive(Serialize)]
struct BalanceOutput {
    k: usize,
    a: [f64; 3],
    residual: f64,
    balanced: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_cap_center: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_cap_radius: Option<f64>,
}

fn cmd_balance(cfg: &RunConfig, out: &mut Outputs) -> CliResult<bool> {
    let mesh = mesh_from_spec(&cfg.require::<String>("mesh")?)?;
    let mu = measure_from_spec(&cfg.require::<String>("measure")?, &mesh)?;
    let k: usize = cfg.require("k")?;
    let s = |v: [f64; 3]| v.map(sig12);
    let result = match k {
        1 => {
            let b = hersch_balance(&mesh, &mu)?;
            BalanceOutput { k, a: s(b.a), residual: sig12(b.residual), balanced: true, image_cap_center: None, image_cap_radius: None }
        }
        2 => {
            let spec = spectrum(&mesh, &mu, 2, &eigen_options(cfg)?)?;
            let nb = nadirashvili_balance(&mesh, &mu, &spec.eigenvectors[1])?;
            BalanceOutput {
                k,
                a: s(nb.a),
                residual: sig12(nb.residual),
                balanced: nb.balanced,
                image_cap_center: Some(s(nb.image_cap.center)),
                image_cap_radius: Some(sig12(nb.image_cap.radius)),
            }
        }
        _ => return Err(CliError::Usage(format!("k = {k}: balancing is defined for k = 1 and 2"))),
    };
    out.say(format!(
        "a = [{}], residual {}, {}",
        result.a.map(output::fmt12).join(", "),
        output::fmt12(result.residual),
        if result.balanced { "balanced" } else { "UNBALANCED" }
    ));
    out.write_json(&out.target(cfg, "balance.json"), &result)?;
    Ok(true)
}

fn cmd_audit(experiments: &[Experiment], opts: &Opts, threads: usize, out: &mut Outputs) -> CliResult<bool> {
    let mut exps = experiments.to_vec();
    exps.sort();
    exps.dedup();
    let configs: Vec<RunConfig> = exps.iter().map(|e| opts.resolve(&format!("audit {}", e.name()), e.defaults())).collect::<CliResult<_>>()?;
    // independent jobs; results are collected and printed in a fixed order
    let results: Vec<CliResult<Vec<StabilityReport>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = exps
            .iter()
            .zip(&configs)
            .map(|(e, cfg)| scope.spawn(move || audit::run(*e, cfg, &eigen_options(cfg)?)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(CliError::Usage("audit job panicked".into())))).collect()
    });
    let mut all_pass = true;
    for ((exp, cfg), result) in exps.iter().zip(&configs).zip(results) {
        let reports = result?;
        let dir = cfg.out_dir();
        let mut files = Vec::new();
        for rep in &reports {
            files.extend(out.write_report(&dir, rep)?);
            out.say(rep.summary());
            all_pass &= rep.passed();
        }
        out.write_manifest(&dir.join(format!("{}.manifest.json", exp.name())), cfg, opts.deterministic, threads, &files)?;
    }
    Ok(all_pass)
}

fn cmd_plotdata(reports: &[PathBuf], cfg: &RunConfig, out: &mut Outputs) -> CliResult<bool> {
    if reports.is_empty() {
        return Err(CliError::Usage("plotdata needs at least one report file".into()));
    }
    let dir = cfg.out_dir();
    let mut long = String::from("report,key,value\n");
    for path in reports {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Core(specgeom_core::Error::Io { path: path.display().to_string(), source: e }))?;
        let rep = StabilityReport::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(&rep.id).to_string();
        out.write_text(&dir.join(format!("{stem}.plot.csv")), &rep.to_csv())?;
        for (k, v) in &rep.provenance {
            long.push_str(&format!("{},{},{}\n", output::csv_field(&stem), output::csv_field(k), output::fmt12(*v)));
        }
    }
    out.write_text(&dir.join("provenance.csv"), &long)?;
    Ok(true)
}

fn cmd_mesh_gen(cfg: &RunConfig, out: &mut Outputs) -> CliResult<bool> {
    let mesh = mesh_from_spec(&cfg.require::<String>("mesh")?)?;
    let path = out.target(cfg, "mesh.json");
    out.prepare(&path)?;
    mesh.save(&path)?;
    out.files.push(path.display().to_string());
    out.say(format!("{} vertices, {} triangles, area {}", mesh.n_vertices(), mesh.n_triangles(), output::fmt12(mesh.total_area())));
    Ok(true)
}

fn cmd_measure_gen(cfg: &RunConfig, out: &mut Outputs) -> CliResult<bool> {
    let mesh_spec: String = cfg.require("mesh")?;
    let mesh = mesh_from_spec(&mesh_spec)?;
    let mut mu = measure_from_spec(&cfg.require::<String>("measure")?, &mesh)?;
    if cfg.raw("normalization") == Some("unit-mass") {
        mu = mu.normalized_unit_mass(&mesh)?;
        mu.normalization = Normalization::UnitMass;
    }
    let file = MeasureFile::from_measure(&mu, Some(mesh_spec));
    out.say(format!("total mass {}", output::fmt12(mu.total_mass(&mesh)?)));
    out.write_json(&out.target(cfg, "measure.json"), &file)?;
    Ok(true)
}

fn run(cli: &Cli) -> CliResult<bool> {
    let threads = configure_threads(cli.opts.deterministic)?;
    let mut out = Outputs::default();
    let (name, cfg, pass) = match &cli.command {
        Command::Audit { experiments } => return cmd_audit(experiments, &cli.opts, threads, &mut out),
        Command::Eig => {
            let cfg = cli.opts.resolve("eig", &[("mesh", "icosphere:5"), ("measure", "uniform"), ("k", "3"), ("normalization", "none")])?;
            let pass = cmd_eig(&cfg, &mut out)?;
            ("eig", cfg, pass)
        }
        Command::Balance => {
            let cfg = cli.opts.resolve("balance", &[("mesh", "icosphere:4"), ("measure", "uniform"), ("k", "1")])?;
            let pass = cmd_balance(&cfg, &mut out)?;
            ("balance", cfg, pass)
        }
        Command::Plotdata { reports } => {
            let cfg = cli.opts.resolve("plotdata", &[])?;
            let pass = cmd_plotdata(reports, &cfg, &mut out)?;
            ("plotdata", cfg, pass)
        }
        Command::MeshGen => {
            let cfg = cli.opts.resolve("mesh-gen", &[("mesh", "icosphere:4")])?;
            let pass = cmd_mesh_gen(&cfg, &mut out)?;
            ("mesh-gen", cfg, pass)
        }
        Command::MeasureGen => {
            let cfg = cli.opts.resolve("measure-gen", &[("mesh", "icosphere:4"), ("measure", "uniform")])?;
            let pass = cmd_measure_gen(&cfg, &mut out)?;
            ("measure-gen", cfg, pass)
        }
    };
    let files = out.files.clone();
    out.write_manifest(&cfg.out_dir().join(format!("{name}.manifest.json")), &cfg, cli.opts.deterministic, threads, &files)?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
