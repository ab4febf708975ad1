//! Potentials `f: R^d -> R` with analytic gradient and Hessian.
//!
//! Points are plain `&[f64]` slices so the simulation loops never allocate.
//! Hessians are written row-major into a `d*d` buffer.

use std::fmt;
use std::sync::Arc;

/// Where a potential came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Builtin(String),
    User(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Builtin(name) => write!(f, "builtin:{name}"),
            Provenance::User(name) => write!(f, "user:{name}"),
        }
    }
}

pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    fn hessian(&self, x: &[f64], hess: &mut [f64]);
    fn provenance(&self) -> Provenance;

    /// True when `hessian` is exact rather than a finite-difference estimate.
    fn has_analytic_hessian(&self) -> bool {
        true
    }

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }

    fn hessian_vec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        self.hessian(x, &mut h);
        h
    }
}

/// `f(x, y) = x^2 + y^2 - a x`, the two-cap stadium test landscape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticDiscCaps {
    pub a: f64,
}

impl Potential for QuadraticDiscCaps {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[0] * x[0] + x[1] * x[1] - self.a * x[0]
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad[0] = 2.0 * x[0] - self.a;
        grad[1] = 2.0 * x[1];
    }
    fn hessian(&self, _x: &[f64], hess: &mut [f64]) {
        hess.copy_from_slice(&[2.0, 0.0, 0.0, 2.0]);
    }
    fn provenance(&self) -> Provenance {
        Provenance::Builtin(format!("quadratic-disc-caps(a={})", self.a))
    }
}

/// `f(x, y) = (y^2 - 2 a(x))^3` with `a(x) = a1 x^2 + b1 x + 1/2`.
///
/// The zero level set of `y^2 - 2a(x)` is a curve of degenerate critical
/// points (the "corniches"), so `f` is not Morse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corniche {
    pub a1: f64,
    pub b1: f64,
    pub delta: f64,
}

impl Corniche {
    /// Coefficients fixed by `a(-1 + delta) = 0` and `a(1) = 1/4`.
    pub fn new(delta: f64) -> Self {
        // a1 + b1 = -1/4 and a1 t^2 + b1 t = -1/2 with t = delta - 1.
        let t = delta - 1.0;
        let a1 = (-0.5 + 0.25 * t) / (t * t - t);
        let b1 = -0.25 - a1;
        Self { a1, b1, delta }
    }

    pub fn a(&self, x: f64) -> f64 {
        self.a1 * x * x + self.b1 * x + 0.5
    }

    fn da(&self, x: f64) -> f64 {
        2.0 * self.a1 * x + self.b1
    }

    fn u(&self, p: &[f64]) -> f64 {
        p[1] * p[1] - 2.0 * self.a(p[0])
    }
}

impl Potential for Corniche {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.u(x).powi(3)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let u = self.u(x);
        let s = 3.0 * u * u;
        grad[0] = s * (-2.0 * self.da(x[0]));
        grad[1] = s * (2.0 * x[1]);
    }
    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        let u = self.u(x);
        let du = [-2.0 * self.da(x[0]), 2.0 * x[1]];
        let d2u = [-4.0 * self.a1, 2.0];
        let s1 = 6.0 * u;
        let s2 = 3.0 * u * u;
        hess[0] = s1 * du[0] * du[0] + s2 * d2u[0];
        hess[1] = s1 * du[0] * du[1];
        hess[2] = hess[1];
        hess[3] = s1 * du[1] * du[1] + s2 * d2u[1];
    }
    fn provenance(&self) -> Provenance {
        Provenance::Builtin(format!("corniche(delta={})", self.delta))
    }
}

/// One-dimensional polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial1d {
    coeffs: Vec<f64>,
}

impl Polynomial1d {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial1d {
        let d: Vec<f64> = self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        Polynomial1d::new(d)
    }
}

impl Potential for Polynomial1d {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x[0])
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let mut d = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            d = d * x[0] + k as f64 * c;
        }
        grad[0] = d;
    }
    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        let mut d = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(2).rev() {
            d = d * x[0] + (k * (k - 1)) as f64 * c;
        }
        hess[0] = d;
    }
    fn provenance(&self) -> Provenance {
        Provenance::Builtin(format!("polynomial{:?}", self.coeffs))
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A potential registered from host-language closures.
///
/// Without an explicit Hessian, the Hessian is estimated by central
/// differences of the gradient.
#[derive(Clone)]
pub struct UserPotential {
    name: String,
    dim: usize,
    value: ScalarFn,
    gradient: VectorFn,
    hessian: Option<VectorFn>,
}

impl UserPotential {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), dim, value: Arc::new(value), gradient: Arc::new(gradient), hessian: None }
    }

    pub fn with_hessian(mut self, hessian: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }
}

impl fmt::Debug for UserPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserPotential")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

const FD_HESSIAN_STEP: f64 = 1e-5;

impl Potential for UserPotential {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (self.gradient)(x, grad)
    }
    fn hessian(&self, x: &[f64], hess: &mut [f64]) {
        if let Some(h) = &self.hessian {
            return h(x, hess);
        }
        let d = self.dim;
        let mut xp = x.to_vec();
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        for j in 0..d {
            xp[j] = x[j] + FD_HESSIAN_STEP;
            (self.gradient)(&xp, &mut gp);
            xp[j] = x[j] - FD_HESSIAN_STEP;
            (self.gradient)(&xp, &mut gm);
            xp[j] = x[j];
            for i in 0..d {
                hess[i * d + j] = (gp[i] - gm[i]) / (2.0 * FD_HESSIAN_STEP);
            }
        }
        // symmetrize
        for i in 0..d {
            for j in (i + 1)..d {
                let m = 0.5 * (hess[i * d + j] + hess[j * d + i]);
                hess[i * d + j] = m;
                hess[j * d + i] = m;
            }
        }
    }
    fn provenance(&self) -> Provenance {
        Provenance::User(self.name.clone())
    }
    fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}
