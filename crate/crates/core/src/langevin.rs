//! Euler–Maruyama simulation of `dX = −∇f(X) dt + √h dB` up to the first
//! exit from the domain.
//!
//! Exit is detected on the first iterate outside the domain. The exit point
//! is the crossing of the last step with the boundary and the exit time is
//! interpolated linearly along that step. No Brownian-bridge correction is
//! applied, so exit times carry an `O(√dt)` bias.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{BoundaryRep, DomainKind, PaperComposite};
use crate::landscape::Landscape;
use crate::rng::{standard_normal, Purpose, Stream, StreamFactory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangevinError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("start point {0:?} is not inside the domain")]
    StartOutside(Vec<f64>),
    #[error("empty start ensemble")]
    EmptyEnsemble,
}

pub type Result<T> = std::result::Result<T, LangevinError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub h: f64,
    pub seed: u64,
    pub max_steps: u64,
}

impl SimConfig {
    pub fn new(dt: f64, h: f64, seed: u64, max_steps: u64) -> Result<Self> {
        let c = Self { dt, h, seed, max_steps };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(LangevinError::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(LangevinError::InvalidConfig(format!("h = {} must be non-negative", self.h)));
        }
        if self.max_steps < 1 {
            return Err(LangevinError::InvalidConfig("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Part of the boundary used to label exit points.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowRegion {
    /// Closed arclength interval `[s0, s1]` on a boundary curve (wraps when `s0 > s1`).
    Arc { s0: f64, s1: f64 },
    /// A boundary point of a 1-D domain.
    Point(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitWindow {
    pub label: String,
    pub region: WindowRegion,
}

impl ExitWindow {
    pub fn contains(&self, landscape: &Landscape, x: &[f64]) -> bool {
        match (&self.region, landscape.domain().boundary()) {
            (WindowRegion::Point(z), _) => x.len() == 1 && (x[0] - z).abs() <= 1e-9,
            (WindowRegion::Arc { s0, s1 }, BoundaryRep::Curve(curve)) if x.len() == 2 => {
                let (s, d) = curve.locate([x[0], x[1]]);
                if d > 1e-8 {
                    return false;
                }
                let tol = 1e-12;
                if s0 <= s1 {
                    s >= s0 - tol && s <= s1 + tol
                } else {
                    s >= s0 - tol || s <= s1 + tol
                }
            }
            _ => false,
        }
    }
}

/// Default windows: `sigma1`/`sigma2` are the right/left segments of the
/// composite domain; `z1`/`z2` the endpoints of an interval.
pub fn default_windows(landscape: &Landscape) -> Vec<ExitWindow> {
    match (landscape.domain().kind(), landscape.domain().boundary()) {
        (DomainKind::PaperComposite, _) => {
            let d = PaperComposite::new();
            let (r0, r1) = d.right_segment();
            let (l0, l1) = d.left_segment();
            vec![
                ExitWindow { label: "sigma1".into(), region: WindowRegion::Arc { s0: r0, s1: r1 } },
                ExitWindow { label: "sigma2".into(), region: WindowRegion::Arc { s0: l0, s1: l1 } },
            ]
        }
        (_, BoundaryRep::Points(p)) => vec![
            ExitWindow { label: "z1".into(), region: WindowRegion::Point(p[0].min(p[1])) },
            ExitWindow { label: "z2".into(), region: WindowRegion::Point(p[0].max(p[1])) },
        ],
        _ => Vec::new(),
    }
}

/// Index of the first window containing `x`.
pub fn classify(landscape: &Landscape, windows: &[ExitWindow], x: &[f64]) -> Option<usize> {
    windows.iter().position(|w| w.contains(landscape, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitEvent {
    pub sample_id: u64,
    pub tau: f64,
    pub x_exit: Vec<f64>,
    /// Index into the window list.
    pub window: Option<usize>,
    pub steps: u64,
    /// `max_steps` reached before exit; `x_exit` is then the last position.
    pub censored: bool,
}

/// One Euler–Maruyama step from `x` into `out`; `grad` is scratch space.
#[inline]
pub fn em_step<R: Rng + ?Sized>(
    landscape: &Landscape,
    x: &[f64],
    dt: f64,
    h: f64,
    rng: &mut R,
    grad: &mut [f64],
    out: &mut [f64],
) {
    landscape.potential().gradient(x, grad);
    let sigma = (h * dt).sqrt();
    for k in 0..x.len() {
        out[k] = x[k] - grad[k] * dt + sigma * standard_normal(rng);
    }
}

/// Runs one trajectory from `x0` until it leaves the domain.
pub fn simulate_until_exit(
    landscape: &Landscape,
    x0: &[f64],
    cfg: &SimConfig,
    windows: &[ExitWindow],
    rng: &mut Stream,
) -> Result<ExitEvent> {
    cfg.validate()?;
    let domain = landscape.domain();
    if x0.len() != landscape.dim() || !domain.contains(x0) {
        return Err(LangevinError::StartOutside(x0.to_vec()));
    }
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; d];
    let mut grad = vec![0.0; d];
    for step in 1..=cfg.max_steps {
        em_step(landscape, &x, cfg.dt, cfg.h, rng, &mut grad, &mut next);
        if !domain.contains(&next) {
            let (frac, xe) = domain.segment_exit(&x, &next);
            let window = classify(landscape, windows, &xe);
            return Ok(ExitEvent {
                sample_id: 0,
                tau: ((step - 1) as f64 + frac) * cfg.dt,
                x_exit: xe,
                window,
                steps: step,
                censored: false,
            });
        }
        std::mem::swap(&mut x, &mut next);
    }
    Ok(ExitEvent {
        sample_id: 0,
        tau: cfg.max_steps as f64 * cfg.dt,
        x_exit: x,
        window: None,
        steps: cfg.max_steps,
        censored: true,
    })
}

/// Where the trajectories of a batch start.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a> {
    Point(&'a [f64]),
    /// Each sample starts at a uniformly drawn member of the ensemble.
    Ensemble(&'a [Vec<f64>]),
}

/// `n_samples` independent exits. Sample `i` uses stream `i` of the exit
/// family, so the result does not depend on scheduling or worker count.
/// `family` separates independent batches under one seed.
pub fn batch_exits(
    landscape: &Landscape,
    start: Start<'_>,
    cfg: &SimConfig,
    windows: &[ExitWindow],
    n_samples: u64,
    family: u64,
) -> Result<Vec<ExitEvent>> {
    cfg.validate()?;
    if let Start::Ensemble(e) = start {
        if e.is_empty() {
            return Err(LangevinError::EmptyEnsemble);
        }
    }
    let factory = StreamFactory::new(cfg.seed);
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = factory.stream(Purpose::ExitSample, family, i);
            let x0: &[f64] = match start {
                Start::Point(p) => p,
                Start::Ensemble(e) => &e[rng.random_range(0..e.len())],
            };
            let mut ev = simulate_until_exit(landscape, x0, cfg, windows, &mut rng)?;
            ev.sample_id = i;
            Ok(ev)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::make_builtin_landscape;
    use crate::oracle1d::Interval1D;
    use crate::potential::Polynomial1d;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn x2() -> Landscape {
        let p = BTreeMap::from([("z1".to_string(), -1.0), ("z2".to_string(), 2.0), ("c2".to_string(), 1.0)]);
        make_builtin_landscape("interval-1d", &p).unwrap()
    }

    fn caps() -> Landscape {
        make_builtin_landscape("quadratic-disc-caps", &BTreeMap::from([("a".to_string(), 0.1)])).unwrap()
    }

    #[test]
    fn deterministic_steps() {
        let l = x2();
        let mut rng = StreamFactory::new(1).stream(Purpose::Synthetic, 0, 0);
        let (mut g, mut out) = ([0.0], [0.0]);
        em_step(&l, &[0.0], 0.1, 0.0, &mut rng, &mut g, &mut out);
        assert_eq!(out[0], 0.0);
        em_step(&l, &[1.0], 0.1, 0.0, &mut rng, &mut g, &mut out);
        assert_relative_eq!(out[0], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn rejects_outside_start() {
        let l = caps();
        let cfg = SimConfig::new(1e-3, 0.5, 1, 100).unwrap();
        let mut rng = StreamFactory::new(1).stream(Purpose::ExitSample, 0, 0);
        assert!(matches!(
            simulate_until_exit(&l, &[3.0, 0.0], &cfg, &[], &mut rng),
            Err(LangevinError::StartOutside(_))
        ));
        assert!(SimConfig::new(0.0, 0.5, 1, 10).is_err());
        assert!(SimConfig::new(1e-3, 0.5, 1, 0).is_err());
    }

    #[test]
    fn censoring_at_low_temperature() {
        let l = caps();
        let cfg = SimConfig::new(1e-3, 0.05, 3, 500).unwrap();
        let mut rng = StreamFactory::new(3).stream(Purpose::ExitSample, 0, 0);
        let ev = simulate_until_exit(&l, &[0.05, 0.0], &cfg, &[], &mut rng).unwrap();
        assert!(ev.censored);
        assert_eq!(ev.steps, 500);
    }

    #[test]
    fn exit_points_on_boundary_and_time_bracketed() {
        let l = caps();
        let windows = default_windows(&l);
        let cfg = SimConfig::new(5e-3, 1.0, 11, 1_000_000).unwrap();
        let evs = batch_exits(&l, Start::Point(&[0.05, 0.0]), &cfg, &windows, 200, 0).unwrap();
        for ev in &evs {
            assert!(!ev.censored);
            assert!(l.domain().signed_distance(&ev.x_exit).abs() < 1e-8);
            assert!(ev.tau >= (ev.steps - 1) as f64 * cfg.dt && ev.tau <= ev.steps as f64 * cfg.dt);
        }
        assert!(evs.iter().any(|e| e.window == Some(0)));
    }

    #[test]
    fn batch_is_deterministic_and_matches_single_runs() {
        let l = caps();
        let w = default_windows(&l);
        let cfg = SimConfig::new(5e-3, 1.0, 5, 1_000_000).unwrap();
        let a = batch_exits(&l, Start::Point(&[0.0, 0.0]), &cfg, &w, 20, 0).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| batch_exits(&l, Start::Point(&[0.0, 0.0]), &cfg, &w, 20, 0).unwrap());
        assert_eq!(a, b);
        let mut rng = StreamFactory::new(5).stream(Purpose::ExitSample, 0, 0);
        let single = simulate_until_exit(&l, &[0.0, 0.0], &cfg, &w, &mut rng).unwrap();
        assert_eq!(single, a[0]);
    }

    #[test]
    fn gradient_flow_decreases_energy() {
        let l = caps();
        // max Hessian eigenvalue 2, so dt < 1/4 keeps the deterministic flow monotone
        let mut rng = StreamFactory::new(1).stream(Purpose::Synthetic, 0, 0);
        let (mut g, mut out) = ([0.0; 2], [0.0; 2]);
        let mut x = [0.7, -1.2];
        for _ in 0..200 {
            em_step(&l, &x, 0.2, 0.0, &mut rng, &mut g, &mut out);
            assert!(l.f(&out) <= l.f(&x) + 1e-15);
            x = out;
        }
    }

    #[test]
    fn windows_classify_exit_points() {
        let l = caps();
        let w = default_windows(&l);
        assert_eq!(classify(&l, &w, &[1.0, 0.3]), Some(0));
        assert_eq!(classify(&l, &w, &[-1.0, -0.9]), Some(1));
        assert_eq!(classify(&l, &w, &[0.0, 2.0]), None);
        let one = x2();
        let w1 = default_windows(&one);
        assert_eq!(classify(&one, &w1, &[2.0]), Some(1));
    }

    #[test]
    fn one_dimensional_exit_probability_matches_oracle() {
        let l = x2();
        let w = default_windows(&l);
        let h = 1.0;
        let cfg = SimConfig::new(1e-3, h, 2024, 10_000_000).unwrap();
        let n = 4000;
        let evs = batch_exits(&l, Start::Point(&[0.0]), &cfg, &w, n, 0).unwrap();
        let p = evs.iter().filter(|e| e.window == Some(1)).count() as f64 / n as f64;
        let oracle = Interval1D::new(-1.0, 2.0, Arc::new(Polynomial1d::new(vec![0.0, 0.0, 1.0])))
            .unwrap()
            .exact_exit_prob(0.0, h)
            .unwrap();
        let sigma = (oracle * (1.0 - oracle) / n as f64).sqrt();
        assert!((p - oracle).abs() < 3.0 * sigma, "p = {p}, oracle = {oracle}, sigma = {sigma}");
    }
}
