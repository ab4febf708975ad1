//! End-to-end experiments: landscape, hypothesis checks, QSD sampling,
//! exit batches per temperature and the comparison of `F` with `G`, with
//! every artifact written as CSV next to a manifest that reproduces it.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agmon::{check_hypo1, Hypo1Entry, Hypo1Method, Hypo1Options, Verdict};
use crate::config::{ConfigError, RunConfig};
use crate::exitstats::{compare_f_g, summarize, ExitSummary, FgComparison, StatsError, Weighting};
use crate::kramers::{rate_rows, theory_curve_g};
use crate::landscape::{
    check_hypotheses, find_boundary_minima, make_builtin_landscape, CriticalInventory, HypothesisReport, Landscape,
};
use crate::langevin::{batch_exits, default_windows, ExitWindow, SimConfig, Start, WindowRegion};
use crate::output::{self, OutputError};
use crate::qsd::{observable_names, sample_qsd, QsdConfig};
use crate::rng::StreamFactory;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "EXITLAB_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl PipelineError {
    /// 2 for configuration errors, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(ConfigError::Io { .. }) => 1,
            PipelineError::Config(_) => 2,
            PipelineError::Stage { stage: "landscape", .. } | PipelineError::Stage { stage: "windows", .. } => 2,
            PipelineError::Stage { .. } => 3,
            PipelineError::Output(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage { stage, message: e.to_string() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Output(OutputError::Io { path: path.display().to_string(), source })
}

pub fn build_landscape(cfg: &RunConfig) -> Result<Landscape> {
    make_builtin_landscape(&cfg.potential.name, &cfg.landscape_params()).map_err(stage("landscape"))
}

/// Configured windows (or the built-in ones) and the index of the target.
pub fn resolve_windows(cfg: &RunConfig, landscape: &Landscape) -> Result<(Vec<ExitWindow>, usize)> {
    let w = &cfg.windows;
    let windows: Vec<ExitWindow> = if w.labels.is_empty() {
        default_windows(landscape)
    } else {
        w.labels
            .iter()
            .zip(w.s_start.iter().zip(&w.s_end))
            .map(|(label, (&s0, &s1))| ExitWindow {
                label: label.clone(),
                region: if landscape.dim() == 1 { WindowRegion::Point(s0) } else { WindowRegion::Arc { s0, s1 } },
            })
            .collect()
    };
    if windows.is_empty() {
        return Err(PipelineError::Stage { stage: "windows", message: "no exit windows defined".into() });
    }
    let target = match &w.target {
        Some(t) => windows.iter().position(|x| &x.label == t).ok_or_else(|| PipelineError::Stage {
            stage: "windows",
            message: format!("target window `{t}` not defined"),
        })?,
        None => windows.len() - 1,
    };
    Ok((windows, target))
}

/// Critical points, the boundary hypotheses and the Agmon-distance check.
pub struct Theory {
    pub inventory: CriticalInventory,
    pub hypotheses: HypothesisReport,
    pub hypo1: Vec<Hypo1Entry>,
}

impl Theory {
    pub fn hypo1_verdict(&self) -> String {
        if self.hypo1.is_empty() {
            return "n/a".into();
        }
        let worst = self
            .hypo1
            .iter()
            .map(|e| e.verdict)
            .max_by_key(|v| match v {
                Verdict::Pass => 0,
                Verdict::Inconclusive => 1,
                Verdict::Fail => 2,
            })
            .unwrap();
        worst.to_string()
    }
}

pub fn analyse(landscape: &Landscape) -> Result<Theory> {
    let inventory = find_boundary_minima(landscape, 4000).map_err(stage("critical points"))?;
    let hypotheses = check_hypotheses(landscape, 4000);
    let hypo1 = if landscape.dim() == 2 {
        check_hypo1(landscape, &inventory, Hypo1Method::AgmonZ1, &Hypo1Options::default()).map_err(stage("hypo1"))?
    } else {
        Vec::new()
    };
    Ok(Theory { inventory, hypotheses, hypo1 })
}

/// Outcome of one temperature of an exit experiment.
#[derive(Debug, Clone)]
pub struct TemperatureRun {
    pub h: f64,
    pub summary: ExitSummary,
    /// Fleming–Viot time to convergence, when started from the QSD.
    pub qsd_time: Option<f64>,
}

pub struct ExperimentReport {
    pub dir: PathBuf,
    pub runs: Vec<TemperatureRun>,
    pub comparison: Option<FgComparison>,
    /// Why no comparison was made, if so.
    pub comparison_error: Option<String>,
    pub theory: Theory,
    pub windows: Vec<ExitWindow>,
    pub target: usize,
}

/// Seeds of the QSD phase and of the exit phase at grid index `k`.
pub fn phase_seeds(seed: u64, k: usize) -> (u64, u64) {
    let f = StreamFactory::new(seed);
    (f.child(2 * k as u64).master(), f.child(2 * k as u64 + 1).master())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(stage("thread pool"))
}

/// Runs `f` on a pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(pool(workers)?.install(f))
}

/// Writes the resolved configuration as `manifest.toml` in `dir`.
pub fn write_manifest(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let mut m = cfg.clone();
    m.meta.version = Some(env!("CARGO_PKG_VERSION").into());
    m.output.dir = None;
    let path = dir.join("manifest.toml");
    std::fs::write(&path, m.to_toml()?).map_err(io_err(&path))
}

/// Runs the full exit experiment of `cfg` into `dir`.
pub fn run_experiment(cfg: &RunConfig, dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_manifest(cfg, dir)?;
    pool(cfg.simulation.workers)?.install(|| run_in_pool(cfg, dir))
}

fn run_in_pool(cfg: &RunConfig, dir: &Path) -> Result<ExperimentReport> {
    let landscape = build_landscape(cfg)?;
    let (windows, target) = resolve_windows(cfg, &landscape)?;
    let theory = analyse(&landscape)?;
    output::write_hypo1(&dir.join("hypo1.csv"), &theory.hypo1)?;
    let sim = &cfg.simulation;
    let rows = rate_rows(&theory.inventory, &sim.h_grid).map_err(stage("rates"))?;
    output::write_rate_rows(&dir.join("rates.csv"), &rows)?;
    let mut runs = Vec::new();
    for (k, &h) in sim.h_grid.iter().enumerate() {
        let (qsd_seed, exit_seed) = phase_seeds(sim.seed, k);
        let sc = SimConfig::new(sim.dt, h, exit_seed, sim.max_steps).map_err(stage("simulation"))?;
        let (events, qsd_time) = if sim.start == "qsd" {
            let q = &cfg.qsd;
            let qc = QsdConfig {
                n_particles: q.n_particles,
                n_chains: q.n_chains,
                dt: sim.dt,
                h,
                seed: qsd_seed,
                r_threshold: q.r_threshold,
                snapshot_stride: q.snapshot_stride,
                min_time: q.min_time,
                max_time: q.max_time,
            };
            let out = sample_qsd(&landscape, &qc).map_err(stage("qsd"))?;
            output::write_qsd_diagnostics(
                &dir.join(format!("qsd_diag_{k}.csv")),
                &observable_names(landscape.dim()),
                &out.history,
            )?;
            let ev = batch_exits(&landscape, Start::Ensemble(&out.particles), &sc, &windows, sim.n_samples, 0)
                .map_err(stage("exits"))?;
            (ev, Some(out.time))
        } else {
            let p = sim.start_point.as_deref().unwrap_or_default();
            let ev =
                batch_exits(&landscape, Start::Point(p), &sc, &windows, sim.n_samples, 0).map_err(stage("exits"))?;
            (ev, None)
        };
        if cfg.output.events {
            output::write_events(&dir.join(format!("events_{k}.csv")), &events, &windows, landscape.dim())?;
        }
        let summary = summarize(&events, windows.len(), Some(target)).map_err(stage("summary"))?;
        runs.push(TemperatureRun { h, summary, qsd_time });
    }
    let summaries: Vec<ExitSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    output::write_summaries(&dir.join("summary.csv"), &sim.h_grid, &summaries, &windows)?;
    let (comparison, comparison_error) = compare(cfg, &theory, &sim.h_grid, &summaries, target)?;
    if let Some(c) = &comparison {
        output::write_fg_table(&dir.join("fg.csv"), c)?;
        output::write_fit(&dir.join("fit.csv"), c, theory.hypotheses.all_pass(), &theory.hypo1_verdict())?;
    }
    Ok(ExperimentReport { dir: dir.to_path_buf(), runs, comparison, comparison_error, theory, windows, target })
}

fn compare(
    cfg: &RunConfig,
    theory: &Theory,
    h_grid: &[f64],
    summaries: &[ExitSummary],
    target: usize,
) -> Result<(Option<FgComparison>, Option<String>)> {
    let index = cfg.windows.theory_index.unwrap_or(theory.inventory.n());
    let curve = theory_curve_g(&theory.inventory, index).map_err(stage("theory"))?;
    match compare_f_g(h_grid, summaries, target, curve, Weighting::InverseVariance) {
        Ok(c) => Ok((Some(c), None)),
        Err(e @ StatsError::TooFewPoints(_)) => Ok((None, Some(e.to_string()))),
        Err(e) => Err(stage("comparison")(e)),
    }
}

/// Scale factors and replacements applied on top of a recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Overrides {
    pub samples_scale: f64,
    pub particles_scale: f64,
    pub h_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Also write per-temperature event files.
    pub events: bool,
}

impl Default for Overrides {
    fn default() -> Self {
        Self { samples_scale: 1.0, particles_scale: 1.0, h_grid: None, seed: None, workers: None, events: false }
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.simulation;
        s.n_samples = ((s.n_samples as f64 * self.samples_scale).round() as u64).max(1);
        cfg.qsd.n_particles =
            ((cfg.qsd.n_particles as f64 * self.particles_scale).round() as usize).max(2 * cfg.qsd.n_chains);
        if let Some(g) = &self.h_grid {
            s.h_grid = g.clone();
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(w) = self.workers {
            s.workers = w;
        }
        cfg.output.events |= self.events;
    }
}

pub const RECIPES: [&str; 3] = ["res1", "res2", "res3"];

/// Named figure recipes as `(subdirectory, config)` pairs.
pub fn recipe(name: &str) -> Result<Vec<(String, RunConfig)>> {
    let base = |potential: &str, dt: f64| {
        let mut c = RunConfig::for_potential(potential);
        c.meta.recipe = Some(name.into());
        c.simulation.dt = dt;
        c
    };
    Ok(match name {
        "res1" => {
            let mut c = base("quadratic-disc-caps", 5e-3);
            c.potential.a = Some(0.1);
            vec![(String::new(), c)]
        }
        "res2" => {
            let mut c = base("quadratic-disc-caps", 2e-3);
            c.potential.a = Some(0.05);
            vec![(String::new(), c)]
        }
        "res3" => [("dt_2e-3", 2e-3), ("dt_5e-4", 5e-4)]
            .into_iter()
            .map(|(sub, dt)| (sub.to_string(), base("corniche", dt)))
            .collect(),
        other => {
            return Err(PipelineError::Config(ConfigError::Semantic(format!(
                "unknown recipe `{other}`; expected one of {}",
                RECIPES.join(", ")
            ))))
        }
    })
}

/// Runs recipe `name` with `overrides` into `out/name[/variant]`.
pub fn reproduce_figure(name: &str, overrides: &Overrides, out: &Path) -> Result<Vec<ExperimentReport>> {
    recipe(name)?
        .into_iter()
        .map(|(sub, mut cfg)| {
            overrides.apply(&mut cfg);
            let dir = if sub.is_empty() { out.join(name) } else { out.join(name).join(sub) };
            run_experiment(&cfg, &dir)
        })
        .collect()
}

/// Default output directory: `$EXITLAB_OUTPUT_DIR`, else `./exitlab-out`.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("exitlab-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(potential: &str) -> RunConfig {
        let mut c = recipe(if potential == "corniche" { "res3" } else { "res1" }).unwrap().remove(0).1;
        c.simulation.n_samples = 300;
        c.simulation.h_grid = vec![1.0, 0.8, 0.67];
        c.qsd.n_particles = 400;
        c.qsd.max_time = 50.0;
        c
    }

    #[test]
    fn recipes_resolve() {
        assert_eq!(recipe("res1").unwrap()[0].1.potential.a, Some(0.1));
        assert_eq!(recipe("res2").unwrap()[0].1.simulation.dt, 2e-3);
        assert_eq!(recipe("res3").unwrap().len(), 2);
        let e = recipe("res4").err().unwrap();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn small_experiment_writes_artifacts_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("quadratic-disc-caps");
        let rep = run_experiment(&cfg, &dir.path().join("a")).unwrap();
        assert_eq!(rep.runs.len(), 3);
        let c = rep.comparison.as_ref().unwrap();
        assert!((c.theory.slope + 0.2).abs() < 1e-9);
        assert_eq!(rep.theory.hypo1_verdict(), "pass");
        for f in ["manifest.toml", "summary.csv", "fg.csv", "fit.csv", "rates.csv", "hypo1.csv", "qsd_diag_0.csv"] {
            assert!(dir.path().join("a").join(f).exists(), "{f}");
        }
        let manifest = RunConfig::from_file(&dir.path().join("a/manifest.toml")).unwrap();
        let mut again = manifest.clone();
        again.simulation.workers = 3;
        run_experiment(&again, &dir.path().join("b")).unwrap();
        for f in ["summary.csv", "fg.csv", "fit.csv", "qsd_diag_1.csv"] {
            let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
            assert!(a == b, "{f} differs");
        }
    }

    #[test]
    fn point_start_single_temperature_skips_fit() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::for_potential("interval-1d");
        cfg.potential.coeffs = Some(vec![0.0, 0.0, 1.0]);
        cfg.domain.z1 = Some(-1.0);
        cfg.domain.z2 = Some(2.0);
        cfg.simulation.start = "point".into();
        cfg.simulation.start_point = Some(vec![0.0]);
        cfg.simulation.h_grid = vec![1.0];
        cfg.simulation.n_samples = 200;
        cfg.simulation.dt = 1e-3;
        cfg.output.events = true;
        let rep = run_experiment(&cfg, dir.path()).unwrap();
        assert!(rep.comparison.is_none());
        assert_eq!(rep.windows[rep.target].label, "z2");
        assert!(dir.path().join("events_0.csv").exists());
    }

    #[test]
    fn bad_window_target_is_a_config_error() {
        let mut cfg = small("quadratic-disc-caps");
        cfg.windows.target = Some("nowhere".into());
        let l = build_landscape(&cfg).unwrap();
        assert_eq!(resolve_windows(&cfg, &l).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn overrides_scale() {
        let mut cfg = small("quadratic-disc-caps");
        Overrides { samples_scale: 0.5, particles_scale: 0.0, seed: Some(4), ..Default::default() }.apply(&mut cfg);
        assert_eq!(cfg.simulation.n_samples, 150);
        assert_eq!(cfg.qsd.n_particles, 8);
        assert_eq!(cfg.simulation.seed, 4);
    }
}
