//! `exitlab` command-line front end.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures, 1 on I/O errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use exitlab::agmon::{
    check_hypo1, check_hypo2, distance_1d_exact, lower_bound_annulus, AgmonMesh, AnnulusOptions, Hypo1Method,
    Hypo1Options,
};
use exitlab::config::{RunConfig, DEFAULT_H_GRID};
use exitlab::exitstats::{compare_f_g, summarize, Weighting};
use exitlab::kmc::{run as kmc_run, table_from_landscape};
use exitlab::kramers::{rate_rows, theory_curve_g, TheoryContext};
use exitlab::landscape::{check_hypotheses, find_boundary_minima, Landscape};
use exitlab::oracle1d::Interval1D;
use exitlab::output::{self, num};
use exitlab::pipeline::{
    self, build_landscape, default_output_dir, resolve_windows, run_experiment, Overrides, PipelineError,
    OUTPUT_DIR_ENV,
};
use exitlab::potential::Polynomial1d;
use exitlab::qsd::{observable_names, sample_qsd, QsdConfig};
use exitlab::rng::StreamFactory;

#[derive(Parser)]
#[command(name = "exitlab", version, about = "Exit events of overdamped Langevin dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure recipe (res1, res2, res3) or rerun a manifest.
    ReproduceFigure(ReproduceArgs),
    /// Eyring–Kramers rates over a temperature grid.
    Rates(RatesArgs),
    /// Agmon distance bounds between two points, or the annulus lower bound.
    Agmon(AgmonArgs),
    /// Summaries and the F/G table from exit-event files.
    ExitDist(ExitDistArgs),
    /// Sample the quasi-stationary distribution with Fleming–Viot particles.
    QsdSample(QsdArgs),
    /// Kinetic Monte Carlo trajectories from the theory rate table.
    KmcRun(KmcArgs),
    /// Exact and asymptotic exit probability on an interval.
    Oracle1d(OracleArgs),
    /// Check the landscape hypotheses and the Agmon-distance condition.
    CheckHypotheses(HypoArgs),
}

#[derive(Args, Clone)]
struct LandscapeArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in potential name (used without --config).
    #[arg(long, default_value = "quadratic-disc-caps")]
    potential: String,
    /// Landscape parameter `key=value` (a, delta, z1, z2, c0, c1, ...).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn dir(&self) -> Result<PathBuf, CliError> {
        let d = self.out.clone().unwrap_or_else(default_output_dir);
        fs::create_dir_all(&d).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))?;
        Ok(d)
    }
}

#[derive(Args)]
struct ReproduceArgs {
    /// Recipe name: res1, res2 or res3.
    name: Option<String>,
    /// Rerun a manifest written by an earlier run.
    #[arg(long, conflicts_with = "name")]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
    #[arg(long, default_value_t = 1.0)]
    samples_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    particles_scale: f64,
    #[arg(long, value_delimiter = ',')]
    h_grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write per-temperature exit events.
    #[arg(long)]
    events: bool,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    #[arg(long, value_delimiter = ',')]
    h_grid: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct AgmonArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    /// Start point (annulus: centre; defaults to the highest boundary minimum).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    from: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    to: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.02)]
    resolution: f64,
    /// dijkstra, annulus or exact (1-D).
    #[arg(long, default_value = "dijkstra")]
    method: String,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    r_inner: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    r_outer: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ExitDistArgs {
    /// Run configuration defining the landscape and windows.
    #[arg(long)]
    config: PathBuf,
    /// Event file per temperature, as `h=path`.
    #[arg(long = "events", value_name = "H=PATH", required = true)]
    events: Vec<String>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct QsdArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    #[arg(long)]
    h: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct KmcArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    #[arg(long, default_value_t = 10)]
    trajectories: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct OracleArgs {
    /// Polynomial coefficients c0, c1, ...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    f_coeffs: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    z1: f64,
    #[arg(long, allow_hyphen_values = true)]
    z2: f64,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long)]
    h: f64,
}

#[derive(Args)]
struct HypoArgs {
    #[command(flatten)]
    landscape: LandscapeArgs,
    /// annulus, agmonz1 or dijkstra.
    #[arg(long, default_value = "agmonz1")]
    method: String,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e.exit_code() {
            2 => CliError::Config(e.to_string()),
            3 => CliError::Numerical(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<output::OutputError> for CliError {
    fn from(e: output::OutputError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

impl LandscapeArgs {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        if let Some(p) = &self.config {
            if !self.params.is_empty() {
                return Err(CliError::Config("--param cannot be combined with --config".into()));
            }
            return RunConfig::from_file(p).map_err(|e| PipelineError::from(e).into());
        }
        let mut cfg = RunConfig::for_potential(&self.potential);
        let mut coeffs = BTreeMap::new();
        for kv in &self.params {
            let (k, v) =
                kv.split_once('=').ok_or_else(|| CliError::Config(format!("--param `{kv}` is not KEY=VALUE")))?;
            let v: f64 = v.trim().parse().map_err(|e| CliError::Config(format!("--param {k}: {e}")))?;
            match k.trim() {
                "a" => cfg.potential.a = Some(v),
                "delta" => cfg.potential.delta = Some(v),
                "z1" => cfg.domain.z1 = Some(v),
                "z2" => cfg.domain.z2 = Some(v),
                c => match c.strip_prefix('c').and_then(|r| r.parse::<usize>().ok()) {
                    Some(i) => {
                        coeffs.insert(i, v);
                    }
                    None => return Err(CliError::Config(format!("unknown parameter `{c}`"))),
                },
            }
        }
        if let Some(&max) = coeffs.keys().last() {
            cfg.potential.coeffs = Some((0..=max).map(|i| coeffs.get(&i).copied().unwrap_or(0.0)).collect());
        }
        Ok(cfg)
    }

    fn landscape(&self) -> Result<(RunConfig, Landscape), CliError> {
        let cfg = self.run_config()?;
        let l = build_landscape(&cfg)?;
        Ok((cfg, l))
    }
}

fn reproduce(a: &ReproduceArgs) -> Result<(), CliError> {
    let out = a.out.dir()?;
    let ov = Overrides {
        samples_scale: a.samples_scale,
        particles_scale: a.particles_scale,
        h_grid: a.h_grid.clone(),
        seed: a.seed,
        workers: a.workers,
        events: a.events,
    };
    let reports = match (&a.name, &a.manifest) {
        (_, Some(m)) => {
            let mut cfg = RunConfig::from_file(m).map_err(PipelineError::from)?;
            ov.apply(&mut cfg);
            let name = cfg.meta.recipe.clone().unwrap_or_else(|| "manifest".into());
            vec![run_experiment(&cfg, &out.join(name))?]
        }
        (Some(n), None) => pipeline::reproduce_figure(n, &ov, &out)?,
        (None, None) => return Err(CliError::Config("give a recipe name or --manifest".into())),
    };
    for r in reports {
        match &r.comparison {
            Some(c) => println!(
                "{}: slope {:.4} ± {:.4} (theory {:.4}), intercept {:.4} ± {:.4} (theory {:.4}), hypo1 {}",
                r.dir.display(),
                c.slope,
                c.slope_se,
                c.theory.slope,
                c.intercept,
                c.intercept_se,
                c.theory.intercept,
                r.theory.hypo1_verdict()
            ),
            None => println!("{}: no fit ({})", r.dir.display(), r.comparison_error.unwrap_or_default()),
        }
    }
    Ok(())
}

fn rates(a: &RatesArgs) -> Result<(), CliError> {
    let (_, l) = a.landscape.landscape()?;
    let inv = find_boundary_minima(&l, 4000).map_err(numerical)?;
    let grid = a.h_grid.clone().unwrap_or_else(|| DEFAULT_H_GRID.to_vec());
    let rows = rate_rows(&inv, &grid).map_err(numerical)?;
    let path = a.out.dir()?.join("rates.csv");
    output::write_rate_rows(&path, &rows)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn agmon(a: &AgmonArgs) -> Result<(), CliError> {
    let (_, l) = a.landscape.landscape()?;
    let dir = a.out.dir()?;
    let path = dir.join("agmon.csv");
    let mut w = output::writer(&path)?;
    let csv_err = |e: exitlab::output::OutputError| CliError::from(e);
    match a.method.as_str() {
        "annulus" => {
            let z = match &a.from {
                Some(z) => z.clone(),
                None => {
                    let inv = find_boundary_minima(&l, 4000).map_err(numerical)?;
                    inv.minimum(inv.n()).map(|m| m.z.clone()).ok_or_else(|| numerical("no boundary minimum"))?
                }
            };
            let b = lower_bound_annulus(&l, &z, a.r_inner, a.r_outer, None, &AnnulusOptions::default())
                .map_err(numerical)?;
            w.write_record(["z_x", "z_y", "r_inner", "r_outer", "alpha", "inf_g", "bound"])
                .map_err(|e| csv_err(e.into()))?;
            w.write_record([
                num(z[0]),
                num(z[1]),
                num(a.r_inner),
                num(a.r_outer),
                num(b.alpha),
                num(b.inf_g),
                num(b.bound),
            ])
            .map_err(|e| csv_err(e.into()))?;
            println!("annulus bound {:.12} (alpha {}, inf g {})", b.bound, b.alpha, b.inf_g);
        }
        "dijkstra" | "exact" => {
            let (x, y) = match (&a.from, &a.to) {
                (Some(x), Some(y)) => (x.clone(), y.clone()),
                _ => return Err(CliError::Config("--from and --to are required".into())),
            };
            if x.len() != l.dim() || y.len() != l.dim() {
                return Err(CliError::Config(format!("points must have {} coordinates", l.dim())));
            }
            let (lower, upper, len) = if a.method == "exact" {
                if l.dim() != 1 {
                    return Err(CliError::Config("method `exact` is one-dimensional".into()));
                }
                let d = distance_1d_exact(&l, x[0], y[0]);
                (d, d, (x[0] - y[0]).abs())
            } else {
                let mesh = AgmonMesh::build(&l, a.resolution).map_err(numerical)?;
                let d = mesh.distance(&l, &x, &y).map_err(numerical)?;
                (d.lower, d.upper, d.witness_length)
            };
            let mut header: Vec<String> = (0..x.len()).map(|k| format!("x{k}")).collect();
            header.extend((0..y.len()).map(|k| format!("y{k}")));
            header.extend(["lower", "upper", "witness_length", "resolution"].map(String::from));
            w.write_record(&header).map_err(|e| csv_err(e.into()))?;
            let mut rec: Vec<String> = x.iter().chain(&y).map(|&v| num(v)).collect();
            rec.extend([num(lower), num(upper), num(len), num(a.resolution)]);
            w.write_record(&rec).map_err(|e| csv_err(e.into()))?;
            println!("{lower:.10} <= d <= {upper:.10}");
        }
        other => return Err(CliError::Config(format!("unknown method `{other}` (dijkstra, annulus, exact)"))),
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn parse_event_arg(s: &str) -> Result<(f64, PathBuf), CliError> {
    let (h, p) = s.split_once('=').ok_or_else(|| CliError::Config(format!("--events `{s}` is not H=PATH")))?;
    let h: f64 = h.parse().map_err(|e| CliError::Config(format!("--events {s}: {e}")))?;
    Ok((h, PathBuf::from(p)))
}

fn exit_dist(a: &ExitDistArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_file(&a.config).map_err(PipelineError::from)?;
    let l = build_landscape(&cfg)?;
    let (windows, target) = resolve_windows(&cfg, &l)?;
    let mut grid = Vec::new();
    let mut summaries = Vec::new();
    for e in &a.events {
        let (h, p) = parse_event_arg(e)?;
        let events = output::read_events(&p, &windows).map_err(|e| match e {
            output::OutputError::Io { .. } => CliError::Io(e.to_string()),
            e => CliError::Config(e.to_string()),
        })?;
        summaries.push(summarize(&events, windows.len(), Some(target)).map_err(numerical)?);
        grid.push(h);
    }
    let dir = a.out.dir()?;
    output::write_summaries(&dir.join("summary.csv"), &grid, &summaries, &windows)?;
    let inv = find_boundary_minima(&l, 4000).map_err(numerical)?;
    let curve = theory_curve_g(&inv, cfg.windows.theory_index.unwrap_or(inv.n())).map_err(numerical)?;
    match compare_f_g(&grid, &summaries, target, curve, Weighting::InverseVariance) {
        Ok(c) => {
            output::write_fg_table(&dir.join("fg.csv"), &c)?;
            println!(
                "slope {:.4} (theory {:.4}), intercept {:.4} (theory {:.4})",
                c.slope, c.theory.slope, c.intercept, c.theory.intercept
            );
        }
        Err(e) => println!("summary written; no fit: {e}"),
    }
    Ok(())
}

fn qsd_sample(a: &QsdArgs) -> Result<(), CliError> {
    let (cfg, l) = a.landscape.landscape()?;
    let q = &cfg.qsd;
    let qc = QsdConfig {
        n_particles: q.n_particles,
        n_chains: q.n_chains,
        dt: cfg.simulation.dt,
        h: a.h,
        seed: cfg.simulation.seed,
        r_threshold: q.r_threshold,
        snapshot_stride: q.snapshot_stride,
        min_time: q.min_time,
        max_time: q.max_time,
    };
    let out = pipeline::with_workers(cfg.simulation.workers, || sample_qsd(&l, &qc))?.map_err(numerical)?;
    let dir = a.out.dir()?;
    output::write_qsd_diagnostics(&dir.join("qsd_diag.csv"), &observable_names(l.dim()), &out.history)?;
    let path = dir.join("particles.csv");
    let mut w = output::writer(&path)?;
    let header: Vec<String> = (0..l.dim()).map(|k| format!("x{k}")).collect();
    w.write_record(&header).map_err(output::OutputError::from)?;
    for p in &out.particles {
        w.write_record(p.iter().map(|&v| num(v))).map_err(output::OutputError::from)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    println!("converged at t = {:.3} ({} particles) -> {}", out.time, out.particles.len(), dir.display());
    Ok(())
}

fn kmc(a: &KmcArgs) -> Result<(), CliError> {
    let (_, l) = a.landscape.landscape()?;
    let inv = find_boundary_minima(&l, 4000).map_err(numerical)?;
    let labels: Vec<String> = (1..=inv.n()).map(|i| format!("beyond_z{i}")).collect();
    let ctx = TheoryContext::new(inv, a.h).map_err(config)?;
    let table = table_from_landscape(&ctx, &labels).map_err(numerical)?;
    let f = StreamFactory::new(a.seed);
    let trajs = (0..a.trajectories)
        .map(|k| kmc_run(&table, 0, a.t_end, &f, k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(numerical)?;
    let dir = a.out.dir()?;
    output::write_rate_table(&dir.join("rate_table.csv"), &table)?;
    output::write_trajectories(&dir.join("trajectories.csv"), &trajs, table.states())?;
    println!("{} trajectories -> {}", trajs.len(), dir.display());
    Ok(())
}

fn oracle(a: &OracleArgs) -> Result<(), CliError> {
    let i = Interval1D::new(a.z1, a.z2, Arc::new(Polynomial1d::new(a.f_coeffs.clone()))).map_err(config)?;
    let exact = i.exact_exit_prob(a.x, a.h).map_err(config)?;
    let (asym, regime) = i.laplace_asymptotic(a.x, a.h).map_err(config)?;
    println!("exact,asymptotic,regime");
    println!("{},{},{}", num(exact), num(asym), regime);
    Ok(())
}

fn hypotheses(a: &HypoArgs) -> Result<(), CliError> {
    let (_, l) = a.landscape.landscape()?;
    let method: Hypo1Method = a.method.parse().map_err(CliError::Config)?;
    let rep = check_hypotheses(&l, 4000);
    for (name, c) in [("H1", &rep.h1), ("H2", &rep.h2), ("H3", &rep.h3)] {
        println!("{name}: {} ({})", if c.pass { "pass" } else { "fail" }, c.detail);
    }
    let inv = find_boundary_minima(&l, 4000).map_err(numerical)?;
    let h2 = check_hypo2(&inv);
    println!("hypo2: {} (margin {:.6})", if h2.holds { "pass" } else { "fail" }, h2.margin);
    if l.dim() == 2 {
        let entries = check_hypo1(&l, &inv, method, &Hypo1Options::default()).map_err(numerical)?;
        for e in &entries {
            println!(
                "hypo1 z{}: {} (bound {:.6} vs threshold {:.6}; {})",
                e.i, e.verdict, e.bound, e.threshold, e.detail
            );
        }
        output::write_hypo1(&a.out.dir()?.join("hypo1.csv"), &entries)?;
    }
    Ok(())
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::ReproduceFigure(a) => reproduce(a),
        Command::Rates(a) => rates(a),
        Command::Agmon(a) => agmon(a),
        Command::ExitDist(a) => exit_dist(a),
        Command::QsdSample(a) => qsd_sample(a),
        Command::KmcRun(a) => kmc(a),
        Command::Oracle1d(a) => oracle(a),
        Command::CheckHypotheses(a) => hypotheses(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("exitlab: {e}");
            ExitCode::from(e.code())
        }
    }
}
