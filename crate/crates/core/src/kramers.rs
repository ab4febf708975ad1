//! Leading-order Eyring–Kramers asymptotics for exits through generalized
//! saddle points (local minima of `f` on the boundary with `∂ₙf > 0`).
//!
//! All formulas drop their `(1 + O(h))` corrections.

use std::f64::consts::PI;

use thiserror::Error;

use crate::domain::BoundaryRep;
use crate::landscape::{CriticalInventory, Landscape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KramersError {
    #[error("temperature h = {0} must be positive and finite")]
    InvalidTemperature(f64),
    #[error("no boundary minimum with index {0}")]
    InvalidIndex(usize),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("boundary parametrization unavailable")]
    BoundaryUnavailable,
}

pub type Result<T> = std::result::Result<T, KramersError>;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryContext {
    pub inventory: CriticalInventory,
    pub h: f64,
    /// Hypotheses reported as failing; formulas are still evaluated.
    pub warnings: Vec<String>,
}

impl TheoryContext {
    pub fn new(inventory: CriticalInventory, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(KramersError::InvalidTemperature(h));
        }
        Ok(Self { inventory, h, warnings: Vec::new() })
    }

    pub fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    fn z(&self, i: usize) -> Result<&crate::landscape::BoundaryMinimum> {
        self.inventory.minimum(i).ok_or(KramersError::InvalidIndex(i))
    }

    /// `Σ_{k <= n0} ∂ₙf(z_k) / √det Hess f|∂Ω(z_k)`.
    fn global_weight(&self) -> f64 {
        self.inventory.boundary_minima[..self.inventory.n0].iter().map(|m| m.dn_f / m.det_hess_boundary.sqrt()).sum()
    }
}

/// Prefactor of `k_{0,i}`: `(πh)^{-1/2} ∂ₙf(z_i) √det Hess f(x0) / √det Hess f|∂Ω(z_i)`.
pub fn rate_prefactor(ctx: &TheoryContext, i: usize) -> Result<f64> {
    let z = ctx.z(i)?;
    Ok((PI * ctx.h).powf(-0.5) * z.dn_f * ctx.inventory.det_hess_x0.sqrt() / z.det_hess_boundary.sqrt())
}

/// `f(z_i) − f(x0)`.
pub fn barrier(ctx: &TheoryContext, i: usize) -> Result<f64> {
    Ok(ctx.z(i)?.f_z - ctx.inventory.f_x0)
}

/// Eyring–Kramers rate `k_{0,i}`.
pub fn rate(ctx: &TheoryContext, i: usize) -> Result<f64> {
    Ok(rate_prefactor(ctx, i)? * (-2.0 * barrier(ctx, i)? / ctx.h).exp())
}

/// Principal eigenvalue `λ_h` (sum over the global boundary minima).
pub fn principal_eigenvalue(ctx: &TheoryContext) -> f64 {
    let inv = &ctx.inventory;
    inv.det_hess_x0.sqrt() / (PI * ctx.h).sqrt() * ctx.global_weight() * (-2.0 * (inv.f_z1() - inv.f_x0) / ctx.h).exp()
}

/// Probability of exiting through the basin of `z_i`, starting from the QSD.
pub fn exit_probability(ctx: &TheoryContext, i: usize) -> Result<f64> {
    let z = ctx.z(i)?;
    Ok(z.dn_f / z.det_hess_boundary.sqrt() / ctx.global_weight()
        * (-2.0 * (z.f_z - ctx.inventory.f_z1()) / ctx.h).exp())
}

/// `G(x) = intercept + slope · x` with `x = 2/h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryCurve {
    pub intercept: f64,
    pub slope: f64,
}

impl TheoryCurve {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// `G(x) = ln[∂ₙf(z_i) √det(z_1) / (∂ₙf(z_1) √det(z_i))] − x (f(z_i) − f(z_1))`.
pub fn theory_curve_g(inventory: &CriticalInventory, i_target: usize) -> Result<TheoryCurve> {
    let zi = inventory.minimum(i_target).ok_or(KramersError::InvalidIndex(i_target))?;
    let z1 = &inventory.boundary_minima[0];
    Ok(TheoryCurve {
        intercept: (zi.dn_f * z1.det_hess_boundary.sqrt() / (z1.dn_f * zi.det_hess_boundary.sqrt())).ln(),
        slope: -(zi.f_z - z1.f_z),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowKind {
    /// Window around the boundary minimum `z_i`.
    Saddle { i: usize },
    /// Window whose lowest point `z_star` lies on its edge.
    Generic {
        f_star: f64,
        z_star: Vec<f64>,
        dn_f_zstar: f64,
        /// Derivative of `f` along the outward conormal of the window at `z_star` (negative).
        dn_partial_sigma_f_zstar: f64,
        /// 1 when the window edge is 0-dimensional (d = 2).
        det_hess_partial_sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub label: String,
    pub kind: WindowKind,
}

/// Exit probability through a window.
pub fn exit_probability_window(ctx: &TheoryContext, window: &WindowSpec) -> Result<f64> {
    match &window.kind {
        WindowKind::Saddle { i } => exit_probability(ctx, *i),
        WindowKind::Generic { f_star, dn_f_zstar, dn_partial_sigma_f_zstar, det_hess_partial_sigma, .. } => {
            if !(*dn_partial_sigma_f_zstar < 0.0) {
                return Err(KramersError::InvalidWindow(format!(
                    "conormal derivative {dn_partial_sigma_f_zstar} must be negative"
                )));
            }
            if !(*dn_f_zstar > 0.0 && *det_hess_partial_sigma > 0.0) {
                return Err(KramersError::InvalidWindow("∂ₙf(z*) and det Hess f|∂Σ(z*) must be positive".into()));
            }
            if *f_star < ctx.inventory.f_z1() {
                return Err(KramersError::InvalidWindow(format!(
                    "f* = {f_star} lies below f(z_1) = {}",
                    ctx.inventory.f_z1()
                )));
            }
            Ok(-ctx.h.sqrt() / (2.0 * PI.sqrt()) * dn_f_zstar
                / (dn_partial_sigma_f_zstar * det_hess_partial_sigma.sqrt())
                / ctx.global_weight()
                * (-2.0 * (f_star - ctx.inventory.f_z1()) / ctx.h).exp())
        }
    }
}

/// Leading-order `∫ u_h e^{-2f/h}`: `π^{d/4} det Hess f(x0)^{-1/4} h^{d/4} e^{-f(x0)/h}`.
pub fn uh_mass(ctx: &TheoryContext) -> f64 {
    let d = ctx.inventory.x0.len() as f64;
    PI.powf(d / 4.0) * ctx.inventory.det_hess_x0.powf(-0.25) * ctx.h.powf(d / 4.0) * (-ctx.inventory.f_x0 / ctx.h).exp()
}

/// Approximate exit density `∂ₙf e^{-2f/h} / ∫_{∂Ω} ∂ₙf e^{-2f/h} dσ` with
/// respect to arclength (counting measure in 1-D).
#[derive(Debug, Clone)]
pub struct ExitDensity<'a> {
    landscape: &'a Landscape,
    h: f64,
    shift: f64,
    normalizer: f64,
}

impl<'a> ExitDensity<'a> {
    /// The normalizer uses the composite trapezoid rule with `panels` panels.
    pub fn new(landscape: &'a Landscape, h: f64, panels: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(KramersError::InvalidTemperature(h));
        }
        let (shift, normalizer) = match landscape.domain().boundary() {
            BoundaryRep::Points(points) => {
                let shift = points.iter().map(|&z| landscape.f(&[z])).fold(f64::INFINITY, f64::min);
                let sum = points
                    .iter()
                    .map(|&z| landscape.normal_derivative(&[z]) * (-2.0 * (landscape.f(&[z]) - shift) / h).exp())
                    .sum();
                (shift, sum)
            }
            BoundaryRep::Curve(curve) => {
                let n = panels.max(1);
                let ds = curve.length() / n as f64;
                let pts: Vec<[f64; 2]> = (0..n).map(|k| curve.point(k as f64 * ds)).collect();
                let shift = pts.iter().map(|p| landscape.f(p)).fold(f64::INFINITY, f64::min);
                // periodic trapezoid: every node has weight ds
                let sum = (0..n)
                    .map(|k| {
                        let s = k as f64 * ds;
                        let p = curve.point(s);
                        let nrm = curve.normal(s);
                        let g = landscape.grad(&p);
                        (g[0] * nrm[0] + g[1] * nrm[1]) * (-2.0 * (landscape.f(&p) - shift) / h).exp()
                    })
                    .sum::<f64>()
                    * ds;
                (shift, sum)
            }
            BoundaryRep::Unavailable => return Err(KramersError::BoundaryUnavailable),
        };
        Ok(Self { landscape, h, shift, normalizer })
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        self.landscape.normal_derivative(z) * (-2.0 * (self.landscape.f(z) - self.shift) / self.h).exp()
            / self.normalizer
    }
}

/// One row of a rate table at fixed `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub h: f64,
    pub i: usize,
    pub barrier: f64,
    pub prefactor: f64,
    pub k_theory: f64,
    pub lambda_h: f64,
    pub p_exit_theory: f64,
}

pub fn rate_rows(inventory: &CriticalInventory, h_grid: &[f64]) -> Result<Vec<RateRow>> {
    let mut rows = Vec::new();
    for &h in h_grid {
        let ctx = TheoryContext::new(inventory.clone(), h)?;
        let lambda_h = principal_eigenvalue(&ctx);
        for m in &inventory.boundary_minima {
            let i = m.basin_id;
            rows.push(RateRow {
                h,
                i,
                barrier: barrier(&ctx, i)?,
                prefactor: rate_prefactor(&ctx, i)?,
                k_theory: rate(&ctx, i)?,
                lambda_h,
                p_exit_theory: exit_probability(&ctx, i)?,
            });
        }
    }
    Ok(rows)
}
