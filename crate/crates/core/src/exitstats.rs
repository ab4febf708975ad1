//! Estimates with uncertainty from exit-event samples, and the statistical
//! checks expected of exits started from the quasi-stationary distribution.

use thiserror::Error;

use crate::kramers::TheoryCurve;
use crate::langevin::ExitEvent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("every event is censored")]
    AllCensored,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("window {0} indicator is constant over the sample")]
    DegenerateWindow(usize),
    #[error("window index {0} out of range")]
    InvalidWindow(usize),
    #[error("mean exit time is zero")]
    ZeroMeanTau,
    #[error("need at least 3 grid points with nonzero counts, got {0}")]
    TooFewPoints(usize),
    #[error("h grid and summaries differ in length")]
    LengthMismatch,
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowEstimate {
    pub count: u64,
    pub p: f64,
    /// `√(p(1−p)/n)`.
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitSummary {
    /// Uncensored events.
    pub n: u64,
    pub censored: u64,
    pub windows: Vec<WindowEstimate>,
    pub unlabeled: WindowEstimate,
    pub tau_mean: f64,
    pub tau_se: f64,
    /// `ln p̂` of the target window; `None` when its count is zero.
    pub f_value: Option<f64>,
}

/// 95% interval: normal approximation, or Wilson score when fewer than 30
/// events fall on either side.
pub fn proportion(count: u64, n: u64) -> WindowEstimate {
    let nf = n as f64;
    let p = count as f64 / nf;
    let se = (p * (1.0 - p) / nf).sqrt();
    let (ci_lo, ci_hi) = if count.min(n - count) < 30 {
        let z2 = Z95 * Z95;
        let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
        let half = Z95 / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        ((centre - half).max(0.0), (centre + half).min(1.0))
    } else {
        ((p - Z95 * se).max(0.0), (p + Z95 * se).min(1.0))
    };
    WindowEstimate { count, p, se, ci_lo, ci_hi }
}

/// Proportions over `n_windows` windows and exit-time moments of the
/// uncensored events; `target` selects the window whose log-proportion is
/// reported.
pub fn summarize(events: &[ExitEvent], n_windows: usize, target: Option<usize>) -> Result<ExitSummary> {
    if let Some(t) = target {
        if t >= n_windows {
            return Err(StatsError::InvalidWindow(t));
        }
    }
    let censored = events.iter().filter(|e| e.censored).count() as u64;
    let live: Vec<&ExitEvent> = events.iter().filter(|e| !e.censored).collect();
    let n = live.len() as u64;
    if n == 0 {
        return Err(StatsError::AllCensored);
    }
    let mut counts = vec![0u64; n_windows];
    let mut unlabeled = 0u64;
    for e in &live {
        match e.window {
            Some(w) if w < n_windows => counts[w] += 1,
            _ => unlabeled += 1,
        }
    }
    let nf = n as f64;
    let tau_mean = live.iter().map(|e| e.tau).sum::<f64>() / nf;
    let var = if n > 1 { live.iter().map(|e| (e.tau - tau_mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    let windows: Vec<WindowEstimate> = counts.iter().map(|&c| proportion(c, n)).collect();
    let f_value = target.and_then(|t| (counts[t] > 0).then(|| windows[t].p.ln()));
    Ok(ExitSummary {
        n,
        censored,
        windows,
        unlabeled: proportion(unlabeled, n),
        tau_mean,
        tau_se: (var / nf).sqrt(),
        f_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub n: usize,
    /// `sup |F_n − F|` against `Exp(1/mean)`.
    pub statistic: f64,
    /// `c(α)/√n` with `c(α) = √(−ln(α/2)/2)`.
    pub critical: f64,
    pub pass: bool,
}

/// One-sample Kolmogorov–Smirnov test against the exponential law with the
/// sample mean plugged in. The plug-in makes the asymptotic critical value
/// conservative, so this is a sanity check rather than a calibrated test.
pub fn exponentiality_test(taus: &[f64], alpha: f64) -> Result<KsResult> {
    let n = taus.len();
    if n < 100 {
        return Err(StatsError::TooFewSamples { needed: 100, got: n });
    }
    let mean = taus.iter().sum::<f64>() / n as f64;
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = if mean > 0.0 {
        sorted
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let cdf = 1.0 - (-t.max(0.0) / mean).exp();
                (cdf - i as f64 / nf).max((i + 1) as f64 / nf - cdf)
            })
            .fold(0.0, f64::max)
    } else {
        1.0
    };
    let critical = (-(alpha / 2.0).ln() / 2.0).sqrt() / nf.sqrt();
    Ok(KsResult { n, statistic, critical, pass: statistic < critical })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependenceResult {
    pub n: usize,
    /// Point-biserial correlation of `τ` with `1{exit ∈ window}`.
    pub correlation: f64,
    /// `correlation · √n`.
    pub z: f64,
    pub pass: bool,
}

/// Correlation between the exit time and the window indicator over the
/// uncensored events; passes when `|z| < 3`.
pub fn independence_test(events: &[ExitEvent], window: usize) -> Result<IndependenceResult> {
    let live: Vec<&ExitEvent> = events.iter().filter(|e| !e.censored).collect();
    let n = live.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let ind: Vec<f64> = live.iter().map(|e| if e.window == Some(window) { 1.0 } else { 0.0 }).collect();
    let p = ind.iter().sum::<f64>() / nf;
    if p == 0.0 || p == 1.0 {
        return Err(StatsError::DegenerateWindow(window));
    }
    let mt = live.iter().map(|e| e.tau).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (e, i) in live.iter().zip(&ind) {
        sxy += (e.tau - mt) * (i - p);
        sxx += (e.tau - mt).powi(2);
    }
    let syy = nf * p * (1.0 - p);
    let correlation = if sxx > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
    let z = correlation * nf.sqrt();
    Ok(IndependenceResult { n, correlation, z, pass: z.abs() < 3.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub k: f64,
    /// Delta-method standard error, treating `p̂` and `τ̄` as independent.
    pub se: f64,
}

/// `k̂ = p̂_window / τ̄`.
pub fn empirical_rate(summary: &ExitSummary, window: usize) -> Result<RateEstimate> {
    let w = summary.windows.get(window).ok_or(StatsError::InvalidWindow(window))?;
    if !(summary.tau_mean > 0.0) {
        return Err(StatsError::ZeroMeanTau);
    }
    let t = summary.tau_mean;
    let k = w.p / t;
    let se = ((w.se / t).powi(2) + (k * summary.tau_se / t).powi(2)).sqrt();
    Ok(RateEstimate { k, se })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Weights `1/se(F)²` with `se(F) = se(p̂)/p̂`.
    InverseVariance,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgRow {
    pub h: f64,
    /// `2/h`.
    pub x: f64,
    pub count: u64,
    pub f: f64,
    pub f_se: f64,
    pub f_ci_lo: f64,
    pub f_ci_hi: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgComparison {
    pub rows: Vec<FgRow>,
    /// Grid values of `h` dropped for a zero target count.
    pub dropped: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub theory: TheoryCurve,
}

/// Fits `F = ln p̂_target` against `x = 2/h` by weighted least squares and
/// sets the fit beside the theory line `G`.
pub fn compare_f_g(
    h_grid: &[f64],
    summaries: &[ExitSummary],
    target: usize,
    theory: TheoryCurve,
    weighting: Weighting,
) -> Result<FgComparison> {
    if h_grid.len() != summaries.len() {
        return Err(StatsError::LengthMismatch);
    }
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (&h, s) in h_grid.iter().zip(summaries) {
        let w = s.windows.get(target).ok_or(StatsError::InvalidWindow(target))?;
        if w.count == 0 {
            dropped.push(h);
            continue;
        }
        let x = 2.0 / h;
        rows.push(FgRow {
            h,
            x,
            count: w.count,
            f: w.p.ln(),
            f_se: w.se / w.p,
            f_ci_lo: w.ci_lo.ln(),
            f_ci_hi: w.ci_hi.ln(),
            g: theory.eval(x),
        });
    }
    if rows.len() < 3 {
        return Err(StatsError::TooFewPoints(rows.len()));
    }
    let weights: Vec<f64> = rows
        .iter()
        .map(|r| match weighting {
            Weighting::Equal => 1.0,
            Weighting::InverseVariance if r.f_se > 0.0 => 1.0 / (r.f_se * r.f_se),
            Weighting::InverseVariance => 1.0,
        })
        .collect();
    let (fit_slope, fit_intercept, slope_se, intercept_se) = weighted_line(&rows, &weights, weighting);
    Ok(FgComparison { rows, dropped, slope: fit_slope, intercept: fit_intercept, slope_se, intercept_se, theory })
}

/// Slope, intercept and their standard errors. Inverse-variance weights give
/// the covariance `(XᵀWX)⁻¹`; equal weights use the residual variance.
fn weighted_line(rows: &[FgRow], w: &[f64], weighting: Weighting) -> (f64, f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = rows.iter().zip(w).map(|(r, w)| w * r.x).sum::<f64>() / sw;
    let ym = rows.iter().zip(w).map(|(r, w)| w * r.f).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().zip(w).map(|(r, w)| w * (r.x - xm).powi(2)).sum();
    let sxy: f64 = rows.iter().zip(w).map(|(r, w)| w * (r.x - xm) * (r.f - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let scale = match weighting {
        Weighting::InverseVariance => 1.0,
        Weighting::Equal => {
            let rss: f64 = rows.iter().map(|r| (r.f - intercept - slope * r.x).powi(2)).sum();
            rss / (rows.len() as f64 - 2.0)
        }
    };
    let slope_se = (scale / sxx).sqrt();
    let intercept_se = (scale * (1.0 / sw + xm * xm / sxx)).sqrt();
    (slope, intercept, slope_se, intercept_se)
}
