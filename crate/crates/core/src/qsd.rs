//! Fleming–Viot sampling of the quasi-stationary distribution, with a
//! Gelman–Rubin convergence diagnostic across independent replicas.
//!
//! Particles advance independently; a particle that leaves the domain is
//! moved onto a uniformly chosen survivor. Each particle owns its noise
//! stream and each step's branching choices come from a stream keyed by the
//! step index, so ensembles do not depend on the worker count.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::landscape::Landscape;
use crate::langevin::em_step;
use crate::rng::{Purpose, Stream, StreamFactory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsdError {
    #[error("a Fleming–Viot ensemble needs at least 2 particles, got {0}")]
    TooFewParticles(usize),
    #[error("all particles exited in step {step}")]
    AllParticlesExited { step: u64 },
    #[error("particle {0:?} is not inside the domain")]
    ParticleOutside(Vec<f64>),
    #[error("invalid QSD config: {0}")]
    InvalidConfig(String),
    #[error("Gelman–Rubin needs at least 2 chains with 2 snapshots each")]
    TooFewSnapshots,
    #[error("chains have different lengths")]
    RaggedChains,
    #[error("within-chain variance is zero")]
    ZeroVariance,
    #[error("rejection sampling found no point inside the domain")]
    InitializationFailed,
    #[error("no convergence by t = {time}: max R = {max_r}")]
    NoConvergence { time: f64, max_r: f64, last: Vec<GrDiag> },
}

pub type Result<T> = std::result::Result<T, QsdError>;

/// Live state of one Fleming–Viot particle system.
#[derive(Debug, Clone)]
pub struct FvEnsemble {
    dim: usize,
    /// Row-major `n × dim` positions.
    positions: Vec<f64>,
    rngs: Vec<Stream>,
    factory: StreamFactory,
    chain: u64,
    pub time: f64,
    pub step: u64,
    pub branch_count: u64,
}

impl FvEnsemble {
    /// Ensemble at the given points; `chain` keys the random streams.
    pub fn from_points(landscape: &Landscape, points: &[Vec<f64>], seed: u64, chain: u64) -> Result<Self> {
        if points.len() < 2 {
            return Err(QsdError::TooFewParticles(points.len()));
        }
        let dim = landscape.dim();
        let mut positions = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim || !landscape.domain().contains(p) {
                return Err(QsdError::ParticleOutside(p.clone()));
            }
            positions.extend_from_slice(p);
        }
        let factory = StreamFactory::new(seed);
        let rngs = (0..points.len() as u64).map(|i| factory.stream(Purpose::FvParticle, chain, i)).collect();
        Ok(Self { dim, positions, rngs, factory, chain, time: 0.0, step: 0, branch_count: 0 })
    }

    /// `n` particles drawn uniformly in the domain by rejection from its bounding box.
    pub fn uniform(landscape: &Landscape, n: usize, seed: u64, chain: u64) -> Result<Self> {
        if n < 2 {
            return Err(QsdError::TooFewParticles(n));
        }
        let (lo, hi) = landscape.domain().bounding_box();
        let mut rng = StreamFactory::new(seed).stream(Purpose::FvInit, chain, 0);
        let mut points = Vec::with_capacity(n);
        let mut x = vec![0.0; lo.len()];
        let mut attempts = 0u64;
        while points.len() < n {
            attempts += 1;
            if attempts > 1000 * n as u64 + 100_000 {
                return Err(QsdError::InitializationFailed);
            }
            for k in 0..x.len() {
                x[k] = rng.random_range(lo[k]..hi[k]);
            }
            if landscape.domain().contains(&x) {
                points.push(x.clone());
            }
        }
        Self::from_points(landscape, &points, seed, chain)
    }

    pub fn len(&self) -> usize {
        self.rngs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rngs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.particles().map(<[f64]>::to_vec).collect()
    }

    /// Ensemble mean of `obs`.
    pub fn mean(&self, obs: impl Fn(&[f64]) -> f64) -> f64 {
        self.particles().map(obs).sum::<f64>() / self.len() as f64
    }
}

/// Advances every particle by one Euler–Maruyama step and branches the
/// exiters, in index order, onto current survivors. Returns the number of
/// exits.
pub fn fv_step(ens: &mut FvEnsemble, landscape: &Landscape, dt: f64, h: f64) -> Result<usize> {
    let d = ens.dim;
    if ens.len() < 2 {
        return Err(QsdError::TooFewParticles(ens.len()));
    }
    let domain = landscape.domain();
    let exited: Vec<bool> = ens
        .positions
        .par_chunks_mut(d)
        .zip(ens.rngs.par_iter_mut())
        .map_init(
            || (vec![0.0; d], vec![0.0; d]),
            |(grad, next), (x, rng)| {
                em_step(landscape, x, dt, h, rng, grad, next);
                x.copy_from_slice(next);
                !domain.contains(x)
            },
        )
        .collect();
    ens.step += 1;
    ens.time += dt;
    let mut alive: Vec<usize> = (0..ens.len()).filter(|&i| !exited[i]).collect();
    if alive.is_empty() {
        return Err(QsdError::AllParticlesExited { step: ens.step });
    }
    let n_exit = ens.len() - alive.len();
    if n_exit > 0 {
        let mut rng = ens.factory.stream(Purpose::FvBranch, ens.chain, ens.step);
        for e in (0..ens.len()).filter(|&i| exited[i]) {
            let j = alive[rng.random_range(0..alive.len())];
            ens.positions.copy_within(j * d..(j + 1) * d, e * d);
            alive.push(e);
        }
        ens.branch_count += n_exit as u64;
    }
    Ok(n_exit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrDiag {
    pub observable: String,
    pub r: f64,
    /// Retained snapshots per chain.
    pub window: usize,
    /// Between-chain variance vanished, so `R < 1` carries no information.
    pub window_too_short: bool,
}

/// Potential scale reduction of `m` chains over `n` snapshots each:
/// `R = √(((n−1)/n · W + B/n) / W)` with `W` the mean within-chain sample
/// variance and `B = n · Var(chain means)` the between-chain variance.
/// Identical chains give `B = 0` and `R = √((n−1)/n)`.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<(f64, bool)> {
    let m = chains.len();
    if m < 2 || chains.iter().any(|c| c.len() < 2) {
        return Err(QsdError::TooFewSnapshots);
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(QsdError::RaggedChains);
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m as f64;
    if !(w > 0.0) {
        return Err(QsdError::ZeroVariance);
    }
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = nf * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    let r = (((nf - 1.0) / nf * w + b / nf) / w).sqrt();
    Ok((r, b == 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsdConfig {
    /// Total particles, split evenly across chains.
    pub n_particles: usize,
    pub n_chains: usize,
    pub dt: f64,
    pub h: f64,
    pub seed: u64,
    pub r_threshold: f64,
    /// Steps between observable snapshots.
    pub snapshot_stride: u64,
    /// No convergence is declared before this time.
    pub min_time: f64,
    pub max_time: f64,
}

impl QsdConfig {
    pub fn new(n_particles: usize, dt: f64, h: f64, seed: u64) -> Self {
        Self {
            n_particles,
            n_chains: 4,
            dt,
            h,
            seed,
            r_threshold: 1.02,
            snapshot_stride: 10,
            min_time: 1.0,
            max_time: 100.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(QsdError::InvalidConfig(m));
        if self.n_chains < 2 {
            return bad(format!("n_chains = {} must be >= 2", self.n_chains));
        }
        if self.n_particles / self.n_chains < 2 {
            return Err(QsdError::TooFewParticles(self.n_particles / self.n_chains));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("dt = {} and h = {} must be positive", self.dt, self.h));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be >= 1".into());
        }
        if !(self.max_time > 0.0) || !(self.min_time >= 0.0) {
            return bad("max_time must be positive and min_time non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub step: u64,
    pub time: f64,
    /// One `R` per observable, in the order of [`observable_names`].
    pub r: Vec<f64>,
    pub branch_count: u64,
}

#[derive(Debug, Clone)]
pub struct QsdOutcome {
    /// Pooled final particles of all chains.
    pub particles: Vec<Vec<f64>>,
    pub time: f64,
    pub steps: u64,
    pub branch_count: u64,
    pub final_diag: Vec<GrDiag>,
    pub history: Vec<DiagRow>,
}

/// `f` followed by one mean per coordinate.
pub fn observable_names(dim: usize) -> Vec<String> {
    std::iter::once("f".to_string()).chain((0..dim).map(|k| format!("x{k}"))).collect()
}

const MIN_SNAPSHOTS: usize = 20;

/// Runs `n_chains` Fleming–Viot replicas from uniform starts until every
/// observable has `R < r_threshold` over the second half of its snapshots.
pub fn sample_qsd(landscape: &Landscape, cfg: &QsdConfig) -> Result<QsdOutcome> {
    cfg.validate()?;
    let dim = landscape.dim();
    let per_chain = cfg.n_particles / cfg.n_chains;
    let mut chains = (0..cfg.n_chains as u64)
        .map(|c| FvEnsemble::uniform(landscape, per_chain, cfg.seed, c))
        .collect::<Result<Vec<_>>>()?;
    let names = observable_names(dim);
    let n_obs = names.len();
    // traces[obs][chain]
    let mut traces = vec![vec![Vec::<f64>::new(); cfg.n_chains]; n_obs];
    let mut history = Vec::new();
    let mut last = Vec::new();
    let max_steps = (cfg.max_time / cfg.dt).ceil() as u64;
    for step in 1..=max_steps {
        for ens in chains.iter_mut() {
            fv_step(ens, landscape, cfg.dt, cfg.h)?;
        }
        if step % cfg.snapshot_stride != 0 {
            continue;
        }
        for (c, ens) in chains.iter().enumerate() {
            traces[0][c].push(ens.mean(|x| landscape.f(x)));
            for k in 0..dim {
                traces[k + 1][c].push(ens.mean(|x| x[k]));
            }
        }
        let len = traces[0][0].len();
        if len < MIN_SNAPSHOTS {
            continue;
        }
        let start = len / 2;
        let mut diag = Vec::with_capacity(n_obs);
        for (o, name) in names.iter().enumerate() {
            let window: Vec<Vec<f64>> = traces[o].iter().map(|t| t[start..].to_vec()).collect();
            let (r, too_short) = match gelman_rubin(&window) {
                Ok(v) => v,
                Err(QsdError::ZeroVariance) => (f64::INFINITY, true),
                Err(e) => return Err(e),
            };
            diag.push(GrDiag { observable: name.clone(), r, window: len - start, window_too_short: too_short });
        }
        let time = chains[0].time;
        let branches = chains.iter().map(|e| e.branch_count).sum();
        history.push(DiagRow { step, time, r: diag.iter().map(|d| d.r).collect(), branch_count: branches });
        let converged = diag.iter().all(|d| d.r < cfg.r_threshold && !d.window_too_short);
        last = diag;
        if converged && time >= cfg.min_time {
            return Ok(QsdOutcome {
                particles: chains.iter().flat_map(FvEnsemble::to_points).collect(),
                time,
                steps: step,
                branch_count: branches,
                final_diag: last,
                history,
            });
        }
    }
    let max_r = last.iter().map(|d| d.r).fold(f64::NAN, f64::max);
    Err(QsdError::NoConvergence { time: chains[0].time, max_r, last })
}
