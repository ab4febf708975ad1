//! Run configuration in TOML. Unknown keys are rejected with their key path,
//! and a resolved configuration serializes back to a manifest that reruns
//! the same experiment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config error at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("config error: {0}")]
    Semantic(String),
    #[error("cannot serialize manifest: {0}")]
    Serialize(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

/// Default temperature grid, `x = 2/h` from 2 to 5.
pub const DEFAULT_H_GRID: [f64; 7] = [1.0, 0.8, 0.67, 0.57, 0.5, 0.44, 0.4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub meta: MetaSection,
    pub potential: PotentialSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub qsd: QsdSection,
    #[serde(default)]
    pub windows: WindowsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// `quadratic-disc-caps`, `corniche` or `interval-1d`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Polynomial coefficients `c0, c1, …` for `interval-1d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Interval endpoints for `interval-1d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt: f64,
    pub h_grid: Vec<f64>,
    pub n_samples: u64,
    pub max_steps: u64,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    /// `qsd` (Fleming–Viot ensemble) or `point` (`start_point`).
    pub start: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_point: Option<Vec<f64>>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt: 5e-3,
            h_grid: DEFAULT_H_GRID.to_vec(),
            n_samples: 100_000,
            max_steps: 100_000_000,
            seed: 20_240_601,
            workers: 1,
            start: "qsd".into(),
            start_point: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QsdSection {
    pub n_particles: usize,
    pub n_chains: usize,
    pub r_threshold: f64,
    pub snapshot_stride: u64,
    pub min_time: f64,
    pub max_time: f64,
}

impl Default for QsdSection {
    fn default() -> Self {
        Self {
            n_particles: 20_000,
            n_chains: 4,
            r_threshold: 1.02,
            snapshot_stride: 10,
            min_time: 1.0,
            max_time: 200.0,
        }
    }
}

/// Exit windows as arclength intervals `[s_start, s_end]` on the boundary
/// (or endpoint coordinates in 1-D, with `s_start = s_end`). Empty `labels`
/// selects the built-in windows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowsSection {
    pub labels: Vec<String>,
    pub s_start: Vec<f64>,
    pub s_end: Vec<f64>,
    /// Window whose log-proportion is `F`; defaults to the last window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Boundary minimum (1-based) whose theory line `G` is compared with `F`;
    /// defaults to the highest one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_index: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Also write every exit event.
    pub events: bool,
}

impl RunConfig {
    pub fn for_potential(name: &str) -> Self {
        Self {
            meta: MetaSection::default(),
            potential: PotentialSection { name: name.into(), a: None, delta: None, coeffs: None },
            domain: DomainSection::default(),
            simulation: SimulationSection::default(),
            qsd: QsdSection::default(),
            windows: WindowsSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(s)
            .map_err(|e| ConfigError::Invalid { path: ".".into(), message: e.to_string() })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Invalid {
            path: e.path().to_string(),
            message: e.inner().to_string().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Parameters for the built-in landscape constructor.
    pub fn landscape_params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        if let Some(a) = self.potential.a {
            p.insert("a".into(), a);
        }
        if let Some(d) = self.potential.delta {
            p.insert("delta".into(), d);
        }
        if let Some(z) = self.domain.z1 {
            p.insert("z1".into(), z);
        }
        if let Some(z) = self.domain.z2 {
            p.insert("z2".into(), z);
        }
        for (k, c) in self.potential.coeffs.iter().flatten().enumerate() {
            p.insert(format!("c{k}"), *c);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ConfigError::Semantic(m.into()));
        let s = &self.simulation;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return bad("simulation.dt must be positive");
        }
        if s.h_grid.is_empty() || s.h_grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("simulation.h_grid must be a non-empty list of positive numbers");
        }
        if s.max_steps == 0 {
            return bad("simulation.max_steps must be >= 1");
        }
        if s.workers == 0 {
            return bad("simulation.workers must be >= 1");
        }
        match s.start.as_str() {
            "qsd" => {}
            "point" if s.start_point.is_some() => {}
            "point" => return bad("simulation.start = \"point\" needs simulation.start_point"),
            _ => return bad("simulation.start must be \"qsd\" or \"point\""),
        }
        let w = &self.windows;
        if w.labels.len() != w.s_start.len() || w.labels.len() != w.s_end.len() {
            return bad("windows.labels, windows.s_start and windows.s_end must have equal lengths");
        }
        if let Some(t) = &w.target {
            if !w.labels.is_empty() && !w.labels.contains(t) {
                return bad("windows.target must be one of windows.labels");
            }
        }
        Ok(())
    }
}
