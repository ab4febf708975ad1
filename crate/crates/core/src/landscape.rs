//! Potential + domain pairs and their critical structure.
//!
//! A [`Landscape`] couples a [`Potential`] with a [`Domain`]. From it we
//! locate the interior minimum `x0`, the local minima `z_1..z_n` of `f`
//! restricted to the boundary (the generalized saddle points), their basins
//! under the boundary gradient flow, and check the standing hypotheses:
//!
//! * **H1** `f` and `f|∂Ω` are Morse,
//! * **H2** `x0` is the unique critical point, below every boundary value,
//! * **H3** `∂ₙf > 0` on `∂Ω`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::domain::{BoundaryCurve, BoundaryRep, Domain, Interval, PaperComposite};
use crate::potential::{Corniche, Polynomial1d, Potential, QuadraticDiscCaps};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandscapeError {
    #[error("unknown landscape `{0}` (expected quadratic-disc-caps, corniche or interval-1d)")]
    UnknownName(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("potential has dimension {potential} but domain has dimension {domain}")]
    DimensionMismatch { potential: usize, domain: usize },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("found {n} interior minima, expected exactly one: {0:?}", n = .0.len())]
    MultipleMinimaFound(Vec<Vec<f64>>),
    #[error("degenerate boundary minimum at arclength {s}: second derivative {second:e}")]
    DegenerateBoundaryMinimum { s: f64, second: f64 },
    #[error("boundary parametrization unavailable; supply the inventory explicitly")]
    BoundaryUnavailable,
    #[error("point is not on the boundary (distance {0:e})")]
    NotOnBoundary(f64),
    #[error("inventory invariant violated: {0}")]
    InvalidInventory(String),
}

pub type Result<T> = std::result::Result<T, LandscapeError>;

#[derive(Clone)]
pub struct Landscape {
    name: String,
    potential: Arc<dyn Potential>,
    domain: Arc<dyn Domain>,
}

impl fmt::Debug for Landscape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Landscape")
            .field("name", &self.name)
            .field("potential", &self.potential.provenance())
            .field("domain", &self.domain.kind())
            .finish()
    }
}

impl Landscape {
    pub fn new(name: impl Into<String>, potential: Arc<dyn Potential>, domain: Arc<dyn Domain>) -> Result<Self> {
        if potential.dim() != domain.dim() {
            return Err(LandscapeError::DimensionMismatch { potential: potential.dim(), domain: domain.dim() });
        }
        Ok(Self { name: name.into(), potential, domain })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn domain(&self) -> &dyn Domain {
        self.domain.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.potential.value(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.potential.gradient_vec(x)
    }

    /// `∂ₙf` at a boundary point.
    pub fn normal_derivative(&self, z: &[f64]) -> f64 {
        let n = self.domain.outward_normal(z);
        dot(&self.grad(z), &n)
    }

    /// `|∇_T f|` at a boundary point.
    pub fn tangential_gradient_norm(&self, z: &[f64]) -> f64 {
        let g = self.grad(z);
        let n = self.domain.outward_normal(z);
        let dn = dot(&g, &n);
        (dot(&g, &g) - dn * dn).max(0.0).sqrt()
    }

    /// `f` along the boundary curve and its first two arclength derivatives.
    pub fn boundary_profile(&self, curve: &BoundaryCurve, s: f64) -> (f64, f64, f64) {
        let p = curve.point(s);
        let t = curve.tangent(s);
        let g = self.grad(&p);
        let value = self.f(&p);
        let d1 = g[0] * t[0] + g[1] * t[1];
        let d2 = if self.potential.has_analytic_hessian() {
            let h = self.potential.hessian_vec(&p);
            let k = curve.curvature_vector(s);
            t[0] * (h[0] * t[0] + h[1] * t[1]) + t[1] * (h[2] * t[0] + h[3] * t[1]) + g[0] * k[0] + g[1] * k[1]
        } else {
            // 5-point stencil with step 1e-4 * boundary length.
            let e = 1e-4 * curve.length();
            let phi = |u: f64| self.f(&curve.point(u));
            (-phi(s + 2.0 * e) + 16.0 * phi(s + e) - 30.0 * value + 16.0 * phi(s - e) - phi(s - 2.0 * e))
                / (12.0 * e * e)
        };
        (value, d1, d2)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Builds one of the reference landscapes.
///
/// * `quadratic-disc-caps` (`a` in `(0, 1/9)`): `x² + y² − a x` on the stadium.
/// * `corniche` (`delta`, default 0.05): `(y² − 2a(x))³` on the stadium.
/// * `interval-1d` (`z1`, `z2`, `c0`, `c1`, ...): polynomial on `[z1, z2]`.
pub fn make_builtin_landscape(name: &str, params: &BTreeMap<String, f64>) -> Result<Landscape> {
    let check_keys = |allowed: &dyn Fn(&str) -> bool| -> Result<()> {
        match params.keys().find(|k| !allowed(k)) {
            Some(k) => Err(LandscapeError::InvalidParams(format!("unknown parameter `{k}` for {name}"))),
            None => Ok(()),
        }
    };
    match name {
        "quadratic-disc-caps" => {
            check_keys(&|k| k == "a")?;
            let a = *params.get("a").ok_or_else(|| LandscapeError::InvalidParams("missing parameter `a`".into()))?;
            if !(a > 0.0 && a < 1.0 / 9.0) {
                return Err(LandscapeError::InvalidParams(format!("a = {a} violates 0 < a < 1/9")));
            }
            Landscape::new(name, Arc::new(QuadraticDiscCaps { a }), Arc::new(PaperComposite::new()))
        }
        "corniche" => {
            check_keys(&|k| k == "delta")?;
            let delta = params.get("delta").copied().unwrap_or(0.05);
            if !(delta > 0.0 && delta < 1.0) {
                return Err(LandscapeError::InvalidParams(format!("delta = {delta} violates 0 < delta < 1")));
            }
            Landscape::new(name, Arc::new(Corniche::new(delta)), Arc::new(PaperComposite::new()))
        }
        "interval-1d" => {
            let is_coeff = |k: &str| k.strip_prefix('c').is_some_and(|r| r.parse::<usize>().is_ok());
            check_keys(&|k| k == "z1" || k == "z2" || is_coeff(k))?;
            let z1 = *params.get("z1").ok_or_else(|| LandscapeError::InvalidParams("missing `z1`".into()))?;
            let z2 = *params.get("z2").ok_or_else(|| LandscapeError::InvalidParams("missing `z2`".into()))?;
            if !(z1 < z2) {
                return Err(LandscapeError::InvalidParams(format!("z1 = {z1} must be < z2 = {z2}")));
            }
            let degree = params
                .keys()
                .filter_map(|k| k.strip_prefix('c').and_then(|r| r.parse::<usize>().ok()))
                .max()
                .ok_or_else(|| LandscapeError::InvalidParams("no polynomial coefficients c0, c1, ...".into()))?;
            let coeffs = (0..=degree).map(|k| params.get(&format!("c{k}")).copied().unwrap_or(0.0)).collect();
            Landscape::new(name, Arc::new(Polynomial1d::new(coeffs)), Arc::new(Interval { z1, z2 }))
        }
        other => Err(LandscapeError::UnknownName(other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    pub f: f64,
    pub det_hess: f64,
    pub eigenvalues: Vec<f64>,
    pub kind: CriticalKind,
}

const EIGEN_TOL: f64 = 1e-8;
const GRAD_TOL: f64 = 1e-10;

fn classify(landscape: &Landscape, x: Vec<f64>) -> CriticalPoint {
    let d = landscape.dim();
    let h = landscape.potential().hessian_vec(&x);
    let m = DMatrix::from_row_slice(d, d, &h);
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let mut eigenvalues: Vec<f64> = eig.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kind = if eigenvalues.iter().any(|e| e.abs() <= EIGEN_TOL) {
        CriticalKind::Degenerate
    } else if eigenvalues.iter().all(|&e| e > 0.0) {
        CriticalKind::Minimum
    } else if eigenvalues.iter().all(|&e| e < 0.0) {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    };
    CriticalPoint { f: landscape.f(&x), det_hess: m.determinant(), eigenvalues, kind, x }
}

fn in_box(landscape: &Landscape, x: &[f64]) -> bool {
    let (lo, hi) = landscape.domain().bounding_box();
    x.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| {
        let pad = 0.1 * (h - l);
        *v >= l - pad && *v <= h + pad
    })
}

fn newton(landscape: &Landscape, start: &[f64]) -> Option<Vec<f64>> {
    let d = landscape.dim();
    let p = landscape.potential();
    let mut x = start.to_vec();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    for _ in 0..200 {
        p.gradient(&x, &mut g);
        if norm(&g) < GRAD_TOL {
            return Some(x);
        }
        p.hessian(&x, &mut h);
        let lu = DMatrix::from_row_slice(d, d, &h).lu();
        let step = lu.solve(&DVector::from_iterator(d, g.iter().map(|v| -v)))?;
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi += si;
        }
        if x.iter().any(|v| !v.is_finite()) || !in_box(landscape, &x) {
            return None;
        }
    }
    None
}

/// Newton from `seed`; on divergence, 50 gradient-descent steps of size 1e-2
/// and one retry.
pub fn newton_critical_point(landscape: &Landscape, seed: &[f64]) -> Option<Vec<f64>> {
    newton(landscape, seed).or_else(|| {
        let mut x = seed.to_vec();
        let mut g = vec![0.0; x.len()];
        for _ in 0..50 {
            landscape.potential().gradient(&x, &mut g);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= 1e-2 * gi;
            }
        }
        if x.iter().all(|v| v.is_finite()) {
            newton(landscape, &x)
        } else {
            None
        }
    })
}

/// Grid of seeds inside the domain, `per_axis` points along each axis.
pub fn default_seeds(landscape: &Landscape, per_axis: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = landscape.domain().bounding_box();
    let d = lo.len();
    let mut out = Vec::new();
    let total = per_axis.pow(d as u32);
    for flat in 0..total {
        let mut rem = flat;
        let x: Vec<f64> = (0..d)
            .map(|k| {
                let i = rem % per_axis;
                rem /= per_axis;
                lo[k] + (hi[k] - lo[k]) * (i as f64 + 0.5) / per_axis as f64
            })
            .collect();
        if landscape.domain().contains(&x) {
            out.push(x);
        }
    }
    out
}

fn critical_points_in_closure(landscape: &Landscape, seeds: &[Vec<f64>]) -> Vec<CriticalPoint> {
    let mut found: Vec<CriticalPoint> = Vec::new();
    for seed in seeds {
        let Some(x) = newton_critical_point(landscape, seed) else { continue };
        if landscape.domain().signed_distance(&x) > 1e-9 {
            continue;
        }
        if found.iter().any(|c| norm(&sub(&c.x, &x)) < 1e-6) {
            continue;
        }
        found.push(classify(landscape, x));
    }
    found
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// The unique interior minimum reached by Newton iteration from `seeds`.
pub fn find_interior_minimum(landscape: &Landscape, seeds: &[Vec<f64>]) -> Result<CriticalPoint> {
    let minima: Vec<CriticalPoint> = critical_points_in_closure(landscape, seeds)
        .into_iter()
        .filter(|c| c.kind == CriticalKind::Minimum && landscape.domain().contains(&c.x))
        .collect();
    match minima.len() {
        0 => Err(LandscapeError::NoConvergence(format!(
            "no nondegenerate interior minimum reached from {} seeds",
            seeds.len()
        ))),
        1 => Ok(minima.into_iter().next().unwrap()),
        _ => Err(LandscapeError::MultipleMinimaFound(minima.into_iter().map(|c| c.x).collect())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMinimum {
    pub z: Vec<f64>,
    pub f_z: f64,
    /// `∂ₙf(z) > 0`.
    pub dn_f: f64,
    /// Determinant of the Hessian of `f|∂Ω` at `z`; 1 for a 0-dimensional boundary.
    pub det_hess_boundary: f64,
    /// 1-based index of the minimum in the ordered inventory.
    pub basin_id: usize,
    /// Arclength position for curve boundaries.
    pub arclength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalInventory {
    pub x0: Vec<f64>,
    pub f_x0: f64,
    pub det_hess_x0: f64,
    /// Ascending in `f`.
    pub boundary_minima: Vec<BoundaryMinimum>,
    pub n0: usize,
}

const TIE_TOL: f64 = 1e-10;

impl CriticalInventory {
    /// Assemble and validate an inventory (the only route for d >= 3).
    pub fn new(x0: Vec<f64>, f_x0: f64, det_hess_x0: f64, mut minima: Vec<BoundaryMinimum>) -> Result<Self> {
        if minima.is_empty() {
            return Err(LandscapeError::InvalidInventory("no boundary minima".into()));
        }
        if !(det_hess_x0 > 0.0) {
            return Err(LandscapeError::InvalidInventory(format!("det Hess f(x0) = {det_hess_x0} <= 0")));
        }
        minima.sort_by(|a, b| a.f_z.partial_cmp(&b.f_z).unwrap());
        for (i, m) in minima.iter_mut().enumerate() {
            if !(m.dn_f > 0.0) {
                return Err(LandscapeError::InvalidInventory(format!("∂ₙf = {} <= 0 at {:?}", m.dn_f, m.z)));
            }
            if !(m.det_hess_boundary > 0.0) {
                return Err(LandscapeError::InvalidInventory(format!(
                    "boundary Hessian determinant {} <= 0 at {:?}",
                    m.det_hess_boundary, m.z
                )));
            }
            m.basin_id = i + 1;
        }
        let f1 = minima[0].f_z;
        let n0 = minima.iter().filter(|m| (m.f_z - f1).abs() <= TIE_TOL).count();
        Ok(Self { x0, f_x0, det_hess_x0, boundary_minima: minima, n0 })
    }

    pub fn n(&self) -> usize {
        self.boundary_minima.len()
    }

    /// `z_i` for 1-based `i`.
    pub fn minimum(&self, i: usize) -> Option<&BoundaryMinimum> {
        i.checked_sub(1).and_then(|k| self.boundary_minima.get(k))
    }

    pub fn f_z1(&self) -> f64 {
        self.boundary_minima[0].f_z
    }

    pub fn f_zn(&self) -> f64 {
        self.boundary_minima.last().unwrap().f_z
    }
}

fn refine_boundary_minimum(landscape: &Landscape, curve: &BoundaryCurve, s0: f64, h: f64) -> (f64, f64) {
    let mut s = s0;
    for _ in 0..100 {
        let (_, d1, d2) = landscape.boundary_profile(curve, s);
        if d1.abs() < 1e-14 {
            break;
        }
        let step = if d2 > 0.0 { -d1 / d2 } else { -d1.signum() * 0.5 * h };
        let step = step.clamp(-h, h);
        s = curve.wrap(s + step);
        if step.abs() < 1e-15 * curve.length() {
            break;
        }
    }
    let (_, _, d2) = landscape.boundary_profile(curve, s);
    (s, d2)
}

/// Locates the boundary minima by sampling `f` along the boundary at
/// `grid_resolution` points, refining each discrete minimum by Newton on the
/// arclength, and assembles the inventory with `x0`.
pub fn find_boundary_minima(landscape: &Landscape, grid_resolution: usize) -> Result<CriticalInventory> {
    let seeds = default_seeds(landscape, if landscape.dim() == 1 { 32 } else { 12 });
    let x0 = find_interior_minimum(landscape, &seeds)?;
    let minima = match landscape.domain().boundary() {
        BoundaryRep::Points(points) => points
            .iter()
            .map(|&z| BoundaryMinimum {
                z: vec![z],
                f_z: landscape.f(&[z]),
                dn_f: landscape.normal_derivative(&[z]),
                det_hess_boundary: 1.0,
                basin_id: 0,
                arclength: None,
            })
            .collect(),
        BoundaryRep::Curve(curve) => {
            let n = grid_resolution.max(8);
            let h = curve.length() / n as f64;
            let values: Vec<f64> = (0..n).map(|k| landscape.f(&curve.point(k as f64 * h))).collect();
            let mut minima: Vec<BoundaryMinimum> = Vec::new();
            for k in 0..n {
                let prev = values[(k + n - 1) % n];
                let next = values[(k + 1) % n];
                if !(values[k] < prev && values[k] <= next) {
                    continue;
                }
                let (s, d2) = refine_boundary_minimum(landscape, curve, k as f64 * h, h);
                if d2 <= 1e-8 {
                    return Err(LandscapeError::DegenerateBoundaryMinimum { s, second: d2 });
                }
                if minima.iter().any(|m| curve.arc_delta(m.arclength.unwrap(), s).abs() < 1e-7) {
                    continue;
                }
                let z = curve.point(s).to_vec();
                let nrm = curve.normal(s);
                let g = landscape.grad(&z);
                minima.push(BoundaryMinimum {
                    f_z: landscape.f(&z),
                    dn_f: g[0] * nrm[0] + g[1] * nrm[1],
                    det_hess_boundary: d2,
                    basin_id: 0,
                    arclength: Some(s),
                    z,
                });
            }
            minima
        }
        BoundaryRep::Unavailable => return Err(LandscapeError::BoundaryUnavailable),
    };
    CriticalInventory::new(x0.x, x0.f, x0.det_hess, minima)
}

/// Label (1-based `basin_id`) of the boundary minimum reached by the boundary
/// gradient flow `ẋ = −∇_T f(x)` started at `point`.
pub fn basin_label(landscape: &Landscape, inventory: &CriticalInventory, point: &[f64]) -> Result<usize> {
    match landscape.domain().boundary() {
        BoundaryRep::Points(_) => inventory
            .boundary_minima
            .iter()
            .find(|m| (m.z[0] - point[0]).abs() < 1e-9)
            .map(|m| m.basin_id)
            .ok_or_else(|| LandscapeError::NotOnBoundary(landscape.domain().signed_distance(point).abs())),
        BoundaryRep::Curve(curve) => {
            let (s0, dist) = curve.locate([point[0], point[1]]);
            if dist > 1e-6 {
                return Err(LandscapeError::NotOnBoundary(dist));
            }
            basin_label_arclength(landscape, inventory, curve, s0)
        }
        BoundaryRep::Unavailable => Err(LandscapeError::BoundaryUnavailable),
    }
}

pub(crate) fn basin_label_arclength(
    landscape: &Landscape,
    inventory: &CriticalInventory,
    curve: &BoundaryCurve,
    s0: f64,
) -> Result<usize> {
    let near = |s: f64| {
        inventory
            .boundary_minima
            .iter()
            .find(|m| m.arclength.is_some_and(|sm| curve.arc_delta(s, sm).abs() < 1e-6))
            .map(|m| m.basin_id)
    };
    let cap = 5e-3 * curve.length();
    let mut s = s0;
    let mut eta = 1e-2;
    let (mut value, mut d1, _) = landscape.boundary_profile(curve, s);
    for _ in 0..200_000 {
        if let Some(id) = near(s) {
            return Ok(id);
        }
        if d1.abs() < 1e-12 {
            return Err(LandscapeError::NoConvergence(format!(
                "boundary flow stalled at arclength {s} (basin-boundary point)"
            )));
        }
        loop {
            let step = (-eta * d1).clamp(-cap, cap);
            let trial = curve.wrap(s + step);
            let (v, d, _) = landscape.boundary_profile(curve, trial);
            if v < value {
                s = trial;
                value = v;
                d1 = d;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
            if eta < 1e-300 {
                return Err(LandscapeError::NoConvergence(format!("no descent from arclength {s}")));
            }
        }
    }
    Err(LandscapeError::NoConvergence(format!("boundary flow from arclength {s0} did not settle")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub h1: HypothesisCheck,
    pub h2: HypothesisCheck,
    pub h3: HypothesisCheck,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.h1.pass && self.h2.pass && self.h3.pass
    }
}

/// Points sampled along the boundary: `(point, outward normal)`.
pub fn boundary_samples(landscape: &Landscape, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    match landscape.domain().boundary() {
        BoundaryRep::Points(points) => {
            points.iter().map(|&z| (vec![z], landscape.domain().outward_normal(&[z]))).collect()
        }
        BoundaryRep::Curve(curve) => {
            let h = curve.length() / n as f64;
            (0..n)
                .map(|k| {
                    let s = k as f64 * h;
                    (curve.point(s).to_vec(), curve.normal(s).to_vec())
                })
                .collect()
        }
        BoundaryRep::Unavailable => Vec::new(),
    }
}

/// Reports H1–H3; failures are report entries, never errors.
///
/// `boundary_resolution` is the number of boundary samples (1e4 by default
/// in the CLI).
pub fn check_hypotheses(landscape: &Landscape, boundary_resolution: usize) -> HypothesisReport {
    let per_axis = if landscape.dim() == 1 { 64 } else { 16 };
    let seeds = default_seeds(landscape, per_axis);
    let crit = critical_points_in_closure(landscape, &seeds);
    let samples = boundary_samples(landscape, boundary_resolution);

    // H1
    let mut h1_issues = Vec::new();
    let degenerate: Vec<&CriticalPoint> = crit.iter().filter(|c| c.kind == CriticalKind::Degenerate).collect();
    if !degenerate.is_empty() {
        h1_issues.push(format!(
            "{} degenerate interior critical point(s), e.g. {:?}",
            degenerate.len(),
            degenerate[0].x
        ));
    }
    if let BoundaryRep::Curve(curve) = landscape.domain().boundary() {
        let n = boundary_resolution.max(16);
        let h = curve.length() / n as f64;
        let d1: Vec<f64> = (0..n).map(|k| landscape.boundary_profile(curve, k as f64 * h).1).collect();
        for k in 0..n {
            let (a, b) = (d1[k], d1[(k + 1) % n]);
            if a == 0.0 || a.signum() != b.signum() {
                // bisection on the sign change of d/ds f
                let (mut lo, mut hi) = (k as f64 * h, (k + 1) as f64 * h);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let dm = landscape.boundary_profile(curve, mid).1;
                    if dm.signum() == a.signum() && a != 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let s = 0.5 * (lo + hi);
                let d2 = landscape.boundary_profile(curve, s).2;
                if d2.abs() <= 1e-8 {
                    h1_issues.push(format!("degenerate critical point of f|∂Ω at arclength {s:.6}"));
                }
            }
        }
    }
    let h1 = HypothesisCheck {
        pass: h1_issues.is_empty(),
        detail: if h1_issues.is_empty() {
            format!("{} nondegenerate critical point(s) in the closure", crit.len())
        } else {
            h1_issues.join("; ")
        },
    };

    // H2
    let h2 = match find_interior_minimum(landscape, &seeds) {
        Ok(x0) => {
            let other: Vec<&CriticalPoint> =
                crit.iter().filter(|c| c.kind != CriticalKind::Degenerate && norm(&sub(&c.x, &x0.x)) > 1e-6).collect();
            let fmin = samples.iter().map(|(p, _)| landscape.f(p)).fold(f64::INFINITY, f64::min);
            if !other.is_empty() {
                HypothesisCheck {
                    pass: false,
                    detail: format!("{} other nondegenerate critical point(s), e.g. {:?}", other.len(), other[0].x),
                }
            } else if fmin > x0.f {
                HypothesisCheck {
                    pass: true,
                    detail: format!("x0 = {:?}, min over ∂Ω of f − f(x0) = {:.6e}", x0.x, fmin - x0.f),
                }
            } else {
                HypothesisCheck { pass: false, detail: format!("min over ∂Ω of f = {fmin} <= f(x0) = {}", x0.f) }
            }
        }
        Err(e) => HypothesisCheck { pass: false, detail: e.to_string() },
    };

    // H3
    let h3 = if samples.is_empty() {
        HypothesisCheck { pass: false, detail: "boundary parametrization unavailable".into() }
    } else {
        let (worst, at) = samples
            .iter()
            .map(|(p, n)| (dot(&landscape.grad(p), n), p))
            .fold((f64::INFINITY, &samples[0].0), |acc, (v, p)| if v < acc.0 { (v, p) } else { acc });
        HypothesisCheck {
            pass: worst > 0.0,
            detail: format!("min ∂ₙf over {} boundary samples = {worst:.6e} at {at:?}", samples.len()),
        }
    };

    HypothesisReport { h1, h2, h3 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Disc;
    use crate::potential::UserPotential;
    use approx::assert_relative_eq;

    fn caps(a: f64) -> Landscape {
        make_builtin_landscape("quadratic-disc-caps", &BTreeMap::from([("a".to_string(), a)])).unwrap()
    }

    fn interval_x2() -> Landscape {
        let p = BTreeMap::from([("z1".to_string(), -1.0), ("z2".to_string(), 2.0), ("c2".to_string(), 1.0)]);
        make_builtin_landscape("interval-1d", &p).unwrap()
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(make_builtin_landscape("nope", &BTreeMap::new()), Err(LandscapeError::UnknownName(_))));
        let err = make_builtin_landscape("quadratic-disc-caps", &BTreeMap::from([("a".to_string(), 0.2)])).unwrap_err();
        assert!(matches!(err, LandscapeError::InvalidParams(ref m) if m.contains("1/9")));
        assert!(make_builtin_landscape("quadratic-disc-caps", &BTreeMap::from([("b".to_string(), 0.05)])).is_err());
    }

    #[test]
    fn interior_minimum_of_caps() {
        let l = caps(0.1);
        let m = find_interior_minimum(&l, &default_seeds(&l, 6)).unwrap();
        assert_relative_eq!(m.x[0], 0.05, epsilon = 1e-12);
        assert_relative_eq!(m.x[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.det_hess, 4.0, epsilon = 1e-12);
        assert_relative_eq!(m.f, -0.0025, epsilon = 1e-14);
        assert!(norm(&l.grad(&m.x)) < 1e-10);
    }

    #[test]
    fn interior_minimum_1d() {
        let l = interval_x2();
        let m = find_interior_minimum(&l, &[vec![1.5], vec![-0.7]]).unwrap();
        assert!(m.x[0].abs() < 1e-12);
        assert_eq!(m.f, 0.0);
        assert_eq!(m.det_hess, 2.0);
    }

    #[test]
    fn two_wells_are_reported() {
        let p = UserPotential::new(
            "double-well",
            1,
            |x| (x[0] * x[0] - 1.0).powi(2),
            |x, g| g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0),
        );
        let l = Landscape::new("dw", Arc::new(p), Arc::new(Interval { z1: -2.0, z2: 2.0 })).unwrap();
        match find_interior_minimum(&l, &default_seeds(&l, 20)) {
            Err(LandscapeError::MultipleMinimaFound(xs)) => assert_eq!(xs.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundary_minima_of_caps() {
        let l = caps(0.1);
        let inv = find_boundary_minima(&l, 2000).unwrap();
        assert_eq!(inv.n(), 2);
        assert_eq!(inv.n0, 1);
        let z1 = inv.minimum(1).unwrap();
        let z2 = inv.minimum(2).unwrap();
        assert_relative_eq!(z1.z[0], 1.0, epsilon = 1e-12);
        assert!(z1.z[1].abs() < 1e-10);
        assert_relative_eq!(z1.dn_f, 1.9, epsilon = 1e-10);
        assert_relative_eq!(z1.det_hess_boundary, 2.0, epsilon = 1e-10);
        assert_relative_eq!(z2.z[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(z2.dn_f, 2.1, epsilon = 1e-10);
        assert_relative_eq!(z2.det_hess_boundary, 2.0, epsilon = 1e-10);
        assert_relative_eq!(z2.f_z - z1.f_z, 0.2, epsilon = 1e-12);
        assert_eq!((z1.basin_id, z2.basin_id), (1, 2));
    }

    #[test]
    fn boundary_minima_stable_under_refinement() {
        for l in [caps(0.1), caps(0.05), make_builtin_landscape("corniche", &BTreeMap::new()).unwrap()] {
            let a = find_boundary_minima(&l, 1000).unwrap();
            let b = find_boundary_minima(&l, 2000).unwrap();
            assert_eq!(a.n(), b.n());
            for (ma, mb) in a.boundary_minima.iter().zip(&b.boundary_minima) {
                assert!(norm(&sub(&ma.z, &mb.z)) < 1e-8, "{:?} vs {:?}", ma.z, mb.z);
            }
        }
    }

    #[test]
    fn boundary_minima_1d() {
        let l = interval_x2();
        let inv = find_boundary_minima(&l, 10).unwrap();
        assert_eq!(inv.boundary_minima[0].z, vec![-1.0]);
        assert_eq!(inv.boundary_minima[1].z, vec![2.0]);
        assert_eq!(inv.boundary_minima[0].det_hess_boundary, 1.0);
        assert_eq!(inv.boundary_minima[0].dn_f, 2.0);
        assert_eq!(inv.boundary_minima[1].dn_f, 4.0);
    }

    #[test]
    fn basin_labels_on_caps() {
        let l = caps(0.1);
        let inv = find_boundary_minima(&l, 2000).unwrap();
        assert_eq!(basin_label(&l, &inv, &[1.0, 0.5]).unwrap(), 1);
        assert_eq!(basin_label(&l, &inv, &[-1.0, 0.0]).unwrap(), 2);
        assert_eq!(basin_label(&l, &inv, &[-1.0, -0.5]).unwrap(), 2);
        assert_eq!(basin_label(&l, &inv, &[0.6, 1.8]).unwrap(), 1);
        assert!(matches!(basin_label(&l, &inv, &[0.0, 0.0]), Err(LandscapeError::NotOnBoundary(_))));
    }

    #[test]
    fn basin_labels_locally_constant() {
        let l = caps(0.1);
        let inv = find_boundary_minima(&l, 2000).unwrap();
        let BoundaryRep::Curve(curve) = l.domain().boundary() else { panic!() };
        let n = 200;
        let labels: Vec<Option<usize>> = (0..n)
            .map(|k| basin_label_arclength(&l, &inv, curve, curve.length() * (k as f64 + 0.5) / n as f64).ok())
            .collect();
        assert!(labels.iter().all(|l| l.is_some()));
        let changes = (0..n).filter(|&k| labels[k] != labels[(k + 1) % n]).count();
        // one switch on each cap
        assert_eq!(changes, 2);
    }

    #[test]
    fn hypotheses_pass_for_caps() {
        let r = check_hypotheses(&caps(0.1), 10_000);
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn inward_gradient_fails_h3() {
        let p = UserPotential::new(
            "hill",
            2,
            |x| -x[0] * x[0] - x[1] * x[1],
            |x, g| {
                g[0] = -2.0 * x[0];
                g[1] = -2.0 * x[1];
            },
        );
        let l = Landscape::new("hill", Arc::new(p), Arc::new(Disc::new([0.0, 0.0], 1.0))).unwrap();
        let r = check_hypotheses(&l, 1000);
        assert!(!r.h3.pass);
        assert!(!r.h2.pass);
    }

    #[test]
    fn corniche_flags_h1() {
        let l = make_builtin_landscape("corniche", &BTreeMap::new()).unwrap();
        let r = check_hypotheses(&l, 10_000);
        assert!(!r.h1.pass, "{r:?}");
        let inv = find_boundary_minima(&l, 2000).unwrap();
        assert_eq!(inv.n(), 2);
        assert_relative_eq!(inv.f_z1(), -0.125, epsilon = 1e-12);
        let a_m1 = Corniche::new(0.05).a(-1.0);
        assert_relative_eq!(inv.f_zn(), -8.0 * a_m1.powi(3), epsilon = 1e-12);
    }

    #[test]
    fn user_potential_uses_fd_boundary_hessian() {
        let p = UserPotential::new(
            "caps-fd",
            2,
            |x| x[0] * x[0] + x[1] * x[1] - 0.1 * x[0],
            |x, g| {
                g[0] = 2.0 * x[0] - 0.1;
                g[1] = 2.0 * x[1];
            },
        );
        let l = Landscape::new("u", Arc::new(p), Arc::new(PaperComposite::new())).unwrap();
        let inv = find_boundary_minima(&l, 2000).unwrap();
        assert_relative_eq!(inv.boundary_minima[0].det_hess_boundary, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn inventory_validation() {
        let m = BoundaryMinimum {
            z: vec![1.0],
            f_z: 1.0,
            dn_f: -1.0,
            det_hess_boundary: 1.0,
            basin_id: 0,
            arclength: None,
        };
        assert!(CriticalInventory::new(vec![0.0], 0.0, 2.0, vec![m]).is_err());
    }
}
