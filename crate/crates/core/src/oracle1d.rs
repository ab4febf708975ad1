//! Exact and Laplace-asymptotic exit probabilities in one dimension.
//!
//! For `dX = −f'(X) dt + √h dB` on `(z1, z2)` started at `x`, the probability
//! of leaving through `z2` is
//! `w_h(x) = ∫_{z1}^x e^{2f/h} / ∫_{z1}^{z2} e^{2f/h}`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::potential::Potential;
use crate::quad::{integrate, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("x = {x} lies outside [{z1}, {z2}]")]
    OutOfInterval { x: f64, z1: f64, z2: f64 },
    #[error("temperature h = {0} must be positive")]
    InvalidTemperature(f64),
    #[error("asymptotic undefined at the left endpoint")]
    AtLeftEndpoint,
    #[error("quadrature failure: {0}")]
    QuadratureFailure(#[from] QuadratureError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// A 1-D potential on `[z1, z2]` with `f'(z1) < 0 < f'(z2)`, `f(z1) < f(z2)`
/// and a single nondegenerate interior minimum.
#[derive(Clone)]
pub struct Interval1D {
    pub z1: f64,
    pub z2: f64,
    f: Arc<dyn Potential>,
    x0: f64,
}

impl fmt::Debug for Interval1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Interval1D")
            .field("z1", &self.z1)
            .field("z2", &self.z2)
            .field("f", &self.f.provenance())
            .field("x0", &self.x0)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `f(x) < f(z1)`
    Below,
    /// `f(x) = f(z1)` (within 1e-12)
    Equal,
    /// `f(x) > f(z1)`
    Above,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Below => "below",
            Regime::Equal => "equal",
            Regime::Above => "above",
        })
    }
}

const REL_TOL: f64 = 1e-12;

impl Interval1D {
    pub fn new(z1: f64, z2: f64, f: Arc<dyn Potential>) -> Result<Self> {
        if f.dim() != 1 {
            return Err(OracleError::InvalidInterval(format!("potential has dimension {}", f.dim())));
        }
        if !(z1 < z2) {
            return Err(OracleError::InvalidInterval(format!("z1 = {z1} must be < z2 = {z2}")));
        }
        let d = |x: f64| f.gradient_vec(&[x])[0];
        if !(d(z1) < 0.0) {
            return Err(OracleError::InvalidInterval(format!("f'(z1) = {} must be negative", d(z1))));
        }
        if !(d(z2) > 0.0) {
            return Err(OracleError::InvalidInterval(format!("f'(z2) = {} must be positive", d(z2))));
        }
        if !(f.value(&[z1]) < f.value(&[z2])) {
            return Err(OracleError::InvalidInterval("f(z1) must be < f(z2)".into()));
        }
        let n = 4096;
        let h = (z2 - z1) / n as f64;
        let mut crossings = Vec::new();
        for k in 0..n {
            let (a, b) = (z1 + k as f64 * h, z1 + (k + 1) as f64 * h);
            if d(a) * d(b) <= 0.0 && !(d(a) == 0.0 && k > 0) {
                crossings.push((a, b));
            }
        }
        if crossings.len() != 1 {
            return Err(OracleError::InvalidInterval(format!(
                "expected one interior critical point, found {}",
                crossings.len()
            )));
        }
        let (mut lo, mut hi) = crossings[0];
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if d(m) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let x0 = 0.5 * (lo + hi);
        if !(f.hessian_vec(&[x0])[0] > 0.0) {
            return Err(OracleError::InvalidInterval(format!("f''(x0) <= 0 at x0 = {x0}")));
        }
        Ok(Self { z1, z2, f, x0 })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn f(&self, x: f64) -> f64 {
        self.f.value(&[x])
    }

    pub fn df(&self, x: f64) -> f64 {
        self.f.gradient_vec(&[x])[0]
    }

    fn check(&self, x: f64, h: f64) -> Result<()> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(OracleError::InvalidTemperature(h));
        }
        if !(x >= self.z1 && x <= self.z2) {
            return Err(OracleError::OutOfInterval { x, z1: self.z1, z2: self.z2 });
        }
        Ok(())
    }

    /// `w_h(x)`, by adaptive quadrature of `e^{2(f − max f)/h}`.
    pub fn exact_exit_prob(&self, x: f64, h: f64) -> Result<f64> {
        self.check(x, h)?;
        exit_prob_quadrature(self.f.as_ref(), self.z1, self.z2, x, h)
    }

    /// Leading-order Laplace asymptotic of `w_h(x)` and its regime.
    pub fn laplace_asymptotic(&self, x: f64, h: f64) -> Result<(f64, Regime)> {
        self.check(x, h)?;
        if x == self.z1 {
            return Err(OracleError::AtLeftEndpoint);
        }
        let (f1, f2, fx) = (self.f(self.z1), self.f(self.z2), self.f(x));
        let (d1, d2) = (self.df(self.z1), self.df(self.z2));
        let barrier = (-2.0 * (f2 - f1) / h).exp();
        Ok(if (fx - f1).abs() < 1e-12 {
            (d2 * (1.0 / self.df(x) - 1.0 / d1) * barrier, Regime::Equal)
        } else if fx < f1 {
            (-d2 / d1 * barrier, Regime::Below)
        } else {
            (d2 / self.df(x) * (-2.0 * (f2 - fx) / h).exp(), Regime::Above)
        })
    }
}

/// `∫_{z1}^x e^{2f/h} / ∫_{z1}^{z2} e^{2f/h}` for any 1-D potential, without
/// the sign conditions of [`Interval1D`].
pub fn exit_prob_quadrature(f: &dyn Potential, z1: f64, z2: f64, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(OracleError::InvalidTemperature(h));
    }
    if !(x >= z1 && x <= z2) {
        return Err(OracleError::OutOfInterval { x, z1, z2 });
    }
    if x == z1 {
        return Ok(0.0);
    }
    if x == z2 {
        return Ok(1.0);
    }
    let n = 256;
    let shift = (0..=n).map(|k| f.value(&[z1 + (z2 - z1) * k as f64 / n as f64])).fold(f64::NEG_INFINITY, f64::max);
    let g = |t: f64| (2.0 * (f.value(&[t]) - shift) / h).exp();
    let num = integrate(g, z1, x, REL_TOL, 0.0, 8, 200_000)?.0;
    let den = integrate(g, z1, z2, REL_TOL, 0.0, 8, 200_000)?.0;
    Ok((num / den).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Polynomial1d;
    use approx::assert_relative_eq;

    fn x2() -> Interval1D {
        Interval1D::new(-1.0, 2.0, Arc::new(Polynomial1d::new(vec![0.0, 0.0, 1.0]))).unwrap()
    }

    #[test]
    fn boundary_values() {
        let i = x2();
        assert_eq!(i.exact_exit_prob(-1.0, 0.3).unwrap(), 0.0);
        assert_eq!(i.exact_exit_prob(2.0, 0.3).unwrap(), 1.0);
        assert!(i.exact_exit_prob(2.5, 0.3).is_err());
        assert!(i.exact_exit_prob(0.0, -1.0).is_err());
    }

    #[test]
    fn symmetric_midpoint() {
        let p = Polynomial1d::new(vec![0.0, -1.0, 1.0]);
        for h in [0.2, 0.7, 3.0] {
            assert_relative_eq!(exit_prob_quadrature(&p, -1.0, 2.0, 0.5, h).unwrap(), 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn matches_independent_simpson() {
        let i = x2();
        let h = 0.4;
        let simpson = |a: f64, b: f64, n: usize| {
            let dx = (b - a) / n as f64;
            let g = |t: f64| (2.0 * (t * t - 4.0) / h).exp();
            (0..n)
                .map(|k| {
                    let l = a + k as f64 * dx;
                    dx / 6.0 * (g(l) + 4.0 * g(l + 0.5 * dx) + g(l + dx))
                })
                .sum::<f64>()
        };
        let oracle = simpson(-1.0, 0.0, 400_000) / simpson(-1.0, 2.0, 1_200_000);
        let w = i.exact_exit_prob(0.0, h).unwrap();
        assert!((w - oracle).abs() < 1e-8 * oracle, "{w} vs {oracle}");
    }

    #[test]
    fn laplace_examples() {
        let i = x2();
        let (v, r) = i.laplace_asymptotic(0.0, 0.3).unwrap();
        assert_eq!(r, Regime::Below);
        assert_relative_eq!(v, 2.0 * (-6.0f64 / 0.3).exp(), max_relative = 1e-14);
        let (v, r) = i.laplace_asymptotic(1.0, 0.3).unwrap();
        assert_eq!(r, Regime::Equal);
        assert_relative_eq!(v, 4.0 * (0.5 + 0.5) * (-6.0f64 / 0.3).exp(), max_relative = 1e-14);
        let (v, r) = i.laplace_asymptotic(1.5, 0.3).unwrap();
        assert_eq!(r, Regime::Above);
        assert_relative_eq!(v, 4.0 / 3.0 * (-2.0 * (4.0 - 2.25) / 0.3f64).exp(), max_relative = 1e-14);
        assert_eq!(i.laplace_asymptotic(-1.0, 0.3), Err(OracleError::AtLeftEndpoint));
    }

    #[test]
    fn laplace_ratio_converges() {
        let i = x2();
        for grid in [[0.5, 0.25, 0.125], [0.6, 0.3, 0.15]] {
            let err: Vec<f64> = grid
                .iter()
                .map(|&h| (i.exact_exit_prob(0.0, h).unwrap() / i.laplace_asymptotic(0.0, h).unwrap().0 - 1.0).abs())
                .collect();
            assert!(err[0] > err[1] && err[1] > err[2], "{err:?}");
        }
    }

    #[test]
    fn monotone_in_x() {
        let i = x2();
        let mut prev = 0.0;
        for k in 0..=60 {
            let x = -1.0 + 3.0 * k as f64 / 60.0;
            let w = i.exact_exit_prob(x, 0.5).unwrap();
            assert!(w >= prev);
            prev = w;
        }
    }

    #[test]
    fn rejects_bad_intervals() {
        let p = || Arc::new(Polynomial1d::new(vec![0.0, 0.0, 1.0]));
        assert!(Interval1D::new(0.5, 2.0, p()).is_err());
        assert!(Interval1D::new(-2.0, 1.0, p()).is_err());
        let dw = Arc::new(Polynomial1d::new(vec![0.0, 0.0, -2.0, 0.0, 1.0]));
        assert!(Interval1D::new(-2.0, 2.5, dw).is_err());
    }
}
