//! CSV input and output. Every file has a header row and numbers are
//! written with 17 significant digits so that reruns can be compared byte
//! for byte.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::agmon::Hypo1Entry;
use crate::exitstats::{ExitSummary, FgComparison};
use crate::kmc::{KmcTrajectory, RateTable};
use crate::kramers::RateRow;
use crate::langevin::{ExitEvent, ExitWindow};
use crate::qsd::DiagRow;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, OutputError>;

/// `x` with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|source| OutputError::Io { path: path.display().to_string(), source })?;
    Ok(csv::Writer::from_writer(f))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|source| OutputError::Io { path: "<csv>".into(), source })
}

pub fn write_events(path: &Path, events: &[ExitEvent], windows: &[ExitWindow], dim: usize) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["sample_id".to_string(), "tau".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    header.extend(["window_label".to_string(), "censored".to_string()]);
    w.write_record(&header)?;
    for e in events {
        let mut rec = vec![e.sample_id.to_string(), num(e.tau)];
        rec.extend(e.x_exit.iter().map(|&v| num(v)));
        rec.push(e.window.map(|i| windows[i].label.clone()).unwrap_or_default());
        rec.push(e.censored.to_string());
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Reads an event file written by [`write_events`]; labels are matched
/// against `windows` and unknown labels are an error.
pub fn read_events(path: &Path, windows: &[ExitWindow]) -> Result<Vec<ExitEvent>> {
    let bad = |message: String| OutputError::Malformed { path: path.display().to_string(), message };
    let f = File::open(path).map_err(|source| OutputError::Io { path: path.display().to_string(), source })?;
    let mut r = csv::Reader::from_reader(f);
    let header = r.headers()?.clone();
    let n = header.len();
    if n < 5
        || &header[0] != "sample_id"
        || &header[1] != "tau"
        || &header[n - 2] != "window_label"
        || &header[n - 1] != "censored"
    {
        return Err(bad("expected columns sample_id, tau, x0.., window_label, censored".into()));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|e| bad(format!("row {}: column {}: {e}", row + 1, &header[k])))
        };
        let label = &rec[n - 2];
        let window = if label.is_empty() {
            None
        } else {
            Some(
                windows
                    .iter()
                    .position(|w| w.label == label)
                    .ok_or_else(|| bad(format!("row {}: unknown window `{label}`", row + 1)))?,
            )
        };
        out.push(ExitEvent {
            sample_id: rec[0].parse().map_err(|e| bad(format!("row {}: sample_id: {e}", row + 1)))?,
            tau: field(1)?,
            x_exit: (2..n - 2).map(field).collect::<Result<_>>()?,
            window,
            steps: 0,
            censored: rec[n - 1].parse().map_err(|e| bad(format!("row {}: censored: {e}", row + 1)))?,
        });
    }
    Ok(out)
}

pub fn write_qsd_diagnostics(path: &Path, names: &[String], rows: &[DiagRow]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend(names.iter().map(|n| format!("R_{n}")));
    header.push("branch_count".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.step.to_string(), num(r.time)];
        rec.extend(r.r.iter().map(|&v| num(v)));
        rec.push(r.branch_count.to_string());
        w.write_record(&rec)?;
    }
    finish(w)
}

/// One row per `h`: sample size, censoring, exit-time mean and each window's proportion.
pub fn write_summaries(path: &Path, h_grid: &[f64], summaries: &[ExitSummary], windows: &[ExitWindow]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header: Vec<String> =
        ["h", "x", "n", "censored", "tau_mean", "tau_se"].iter().map(|s| s.to_string()).collect();
    for win in windows {
        for col in ["count", "p", "se", "ci_lo", "ci_hi"] {
            header.push(format!("{}_{col}", win.label));
        }
    }
    header.extend(["unlabeled_p".to_string(), "F".to_string()]);
    w.write_record(&header)?;
    for (&h, s) in h_grid.iter().zip(summaries) {
        let mut rec =
            vec![num(h), num(2.0 / h), s.n.to_string(), s.censored.to_string(), num(s.tau_mean), num(s.tau_se)];
        for e in &s.windows {
            rec.extend([e.count.to_string(), num(e.p), num(e.se), num(e.ci_lo), num(e.ci_hi)]);
        }
        rec.push(num(s.unlabeled.p));
        rec.push(opt(s.f_value));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Plot data `(x, F, F_ci_lo, F_ci_hi, G)` plus the sample counts.
pub fn write_fg_table(path: &Path, c: &FgComparison) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "F", "F_ci_lo", "F_ci_hi", "G", "h", "F_se", "count"])?;
    for r in &c.rows {
        w.write_record([
            num(r.x),
            num(r.f),
            num(r.f_ci_lo),
            num(r.f_ci_hi),
            num(r.g),
            num(r.h),
            num(r.f_se),
            r.count.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_fit(path: &Path, c: &FgComparison, hypotheses_pass: bool, hypo1: &str) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "slope",
        "slope_se",
        "intercept",
        "intercept_se",
        "theory_slope",
        "theory_intercept",
        "points",
        "dropped",
        "hypotheses_pass",
        "hypo1",
    ])?;
    w.write_record([
        num(c.slope),
        num(c.slope_se),
        num(c.intercept),
        num(c.intercept_se),
        num(c.theory.slope),
        num(c.theory.intercept),
        c.rows.len().to_string(),
        c.dropped.len().to_string(),
        hypotheses_pass.to_string(),
        hypo1.to_string(),
    ])?;
    finish(w)
}

pub fn write_rate_rows(path: &Path, rows: &[RateRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["h", "i", "barrier", "prefactor", "k_theory", "lambda_h", "p_exit_theory"])?;
    for r in rows {
        w.write_record([
            num(r.h),
            r.i.to_string(),
            num(r.barrier),
            num(r.prefactor),
            num(r.k_theory),
            num(r.lambda_h),
            num(r.p_exit_theory),
        ])?;
    }
    finish(w)
}

pub fn write_rate_table(path: &Path, table: &RateTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["i", "j", "k", "provenance"])?;
    for (i, j, k, p) in table.entries() {
        w.write_record([i.to_string(), j.to_string(), num(k), p.to_string()])?;
    }
    finish(w)
}

/// Trajectories as `(trajectory, t, state)` rows, state given by label.
pub fn write_trajectories(path: &Path, trajs: &[KmcTrajectory], labels: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["trajectory", "t", "state"])?;
    for (n, tr) in trajs.iter().enumerate() {
        for (t, s) in tr.times.iter().zip(&tr.states) {
            w.write_record([n.to_string(), num(*t), labels[*s].clone()])?;
        }
    }
    finish(w)
}

pub fn write_hypo1(path: &Path, entries: &[Hypo1Entry]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["i", "threshold", "bound", "kind", "verdict", "detail"])?;
    for e in entries {
        w.write_record([
            e.i.to_string(),
            num(e.threshold),
            num(e.bound),
            format!("{:?}", e.kind),
            e.verdict.to_string(),
            e.detail.clone(),
        ])?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = num(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        for x in [std::f64::consts::PI, -1e-300, 12345.678, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn events_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let windows = vec![ExitWindow { label: "a,b".into(), region: crate::langevin::WindowRegion::Point(1.0) }];
        let ev = ExitEvent { sample_id: 3, tau: 0.25, x_exit: vec![1.0], window: Some(0), steps: 5, censored: false };
        write_events(&p, &[ev], &windows, 1).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "sample_id,tau,x0,window_label,censored\n3,2.5000000000000000e-1,1.0000000000000000e0,\"a,b\",false\n"
        );
        let back = read_events(&p, &windows).unwrap();
        assert_eq!((back[0].tau, back[0].window, back[0].sample_id), (0.25, Some(0), 3));
        assert!(read_events(&p, &[]).is_err());
    }
}
