//! Acceptance criteria 1 to 10, one PASS/FAIL line each.
//!
//! Numeric arguments select criteria (`cargo test --test acceptance -- 3 7`);
//! with none, all run. The process fails if any selected criterion fails.
//! Experiment outputs are kept under the cargo target tmp directory.

use std::collections::BTreeMap;
use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use exitlab::agmon::{
    check_hypo1, distance_upper, lower_bound_annulus, path_length, AgmonMesh, AnnulusOptions, Hypo1Method,
    Hypo1Options, Verdict,
};
use exitlab::config::RunConfig;
use exitlab::domain::BoundaryRep;
use exitlab::exitstats::{empirical_rate, exponentiality_test, independence_test, summarize};
use exitlab::kmc::{jump_sample, table_from_landscape};
use exitlab::kramers::{
    exit_probability, exit_probability_window, principal_eigenvalue, rate, ExitDensity, TheoryContext, WindowKind,
    WindowSpec,
};
use exitlab::landscape::{find_boundary_minima, make_builtin_landscape, Landscape};
use exitlab::langevin::{batch_exits, default_windows, ExitWindow, SimConfig, Start};
use exitlab::oracle1d::Interval1D;
use exitlab::pipeline::{analyse, recipe, run_experiment};
use exitlab::potential::Polynomial1d;
use exitlab::qsd::{sample_qsd, QsdConfig};
use exitlab::rng::StreamFactory;

type Check = Result<(bool, String), Box<dyn Error>>;

const X_GRID: [f64; 5] = [2.0, 2.5, 3.0, 3.5, 4.0];
const SEED: u64 = 20_240_601;

fn out_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn caps(a: f64) -> Landscape {
    make_builtin_landscape("quadratic-disc-caps", &BTreeMap::from([("a".to_string(), a)])).unwrap()
}

fn window_index(windows: &[ExitWindow], label: &str) -> usize {
    windows.iter().position(|w| w.label == label).unwrap()
}

fn figure_config(name: &str) -> Result<RunConfig, Box<dyn Error>> {
    let (_, mut cfg) = recipe(name)?.remove(0);
    cfg.simulation.h_grid = X_GRID.iter().map(|x| 2.0 / x).collect();
    Ok(cfg)
}

fn figure(name: &str, slope_target: f64, intercept_target: Option<f64>) -> Check {
    let cfg = figure_config(name)?;
    let report = run_experiment(&cfg, &out_root().join(format!("{name}_w1")))?;
    let c = report.comparison.ok_or_else(|| report.comparison_error.unwrap_or_default())?;
    let slope_ok = (c.slope - slope_target).abs() <= 0.1 * slope_target.abs();
    let mut detail = format!(
        "slope {:.4} ± {:.4} vs {slope_target} (±10%), intercept {:.4} ± {:.4}",
        c.slope, c.slope_se, c.intercept, c.intercept_se
    );
    let mut pass = slope_ok;
    if let Some(b) = intercept_target {
        let tol = (3.0 * c.intercept_se).max(0.15);
        pass &= (c.intercept - b).abs() <= tol;
        detail.push_str(&format!(" vs {b:.4} (tol {tol:.4})"));
    }
    let f: Vec<String> = c.rows.iter().map(|r| format!("x={:.2}: F={:.3} G={:.3}", r.x, r.f, r.g)).collect();
    detail.push_str(&format!("; {}", f.join(", ")));
    let (s1, s2) = (window_index(&report.windows, "sigma1"), window_index(&report.windows, "sigma2"));
    let pts: Vec<(f64, f64)> =
        report.runs.iter().map(|r| (2.0 / r.h, (r.summary.windows[s2].p / r.summary.windows[s1].p).ln())).collect();
    detail.push_str(&format!("; diagnostic slope of ln(p̂₂/p̂₁): {:.4}", ols_slope(&pts)));
    Ok((pass, detail))
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_1() -> Check {
    figure("res1", -0.2, Some((2.1f64 / 1.9).ln()))
}

fn criterion_2() -> Check {
    figure("res2", -0.1, None)
}

fn criterion_3() -> Check {
    let (h, m) = (0.6, 200_000u64);
    let oracle = Interval1D::new(-1.0, 2.0, Arc::new(Polynomial1d::new(vec![0.0, 0.0, 1.0])))?;
    let w = oracle.exact_exit_prob(0.0, h)?;
    let params = BTreeMap::from([
        ("z1".to_string(), -1.0),
        ("z2".to_string(), 2.0),
        ("c0".to_string(), 0.0),
        ("c1".to_string(), 0.0),
        ("c2".to_string(), 1.0),
    ]);
    let l = make_builtin_landscape("interval-1d", &params)?;
    let windows = default_windows(&l);
    let right = window_index(&windows, "z2");
    let cfg = SimConfig::new(1e-4, h, SEED, 10_000_000_000)?;
    let events = batch_exits(&l, Start::Point(&[0.0]), &cfg, &windows, m, 0)?;
    let censored = events.iter().filter(|e| e.censored).count();
    let count = events.iter().filter(|e| e.window == Some(right)).count();
    let p = count as f64 / m as f64;
    let sigma = (w * (1.0 - w) / m as f64).sqrt();
    let tol = 3.0 * sigma + 0.05 * w;
    Ok((
        censored == 0 && (p - w).abs() < tol,
        format!("p̂ = {p:.4e} ({count}/{m}), w_h(0) = {w:.4e}, |diff| = {:.3e} < {tol:.3e}", (p - w).abs()),
    ))
}

fn criterion_4() -> Check {
    let i = Interval1D::new(-1.0, 2.0, Arc::new(Polynomial1d::new(vec![0.0, 0.0, 1.0])))?;
    let mut errs = Vec::new();
    for h in [0.6, 0.3, 0.15] {
        let exact = i.exact_exit_prob(0.0, h)?;
        let (asym, regime) = i.laplace_asymptotic(0.0, h)?;
        if regime.to_string() != "below" {
            return Ok((false, format!("x=0 classified as {regime} at h={h}")));
        }
        errs.push((exact / asym - 1.0).abs());
    }
    let pass = errs.windows(2).all(|p| p[1] < p[0] - 1e-8);
    Ok((
        pass,
        format!("|exact/asymptotic − 1| at h = 0.6, 0.3, 0.15: {:.4e}, {:.4e}, {:.4e}", errs[0], errs[1], errs[2]),
    ))
}

fn criterion_5() -> Check {
    let l = caps(0.1);
    let h = 0.6;
    let windows = default_windows(&l);
    let mut q = QsdConfig::new(20_000, 5e-3, h, SEED);
    q.max_time = 200.0;
    let qsd = sample_qsd(&l, &q)?;
    let cfg = SimConfig::new(5e-3, h, SEED + 1, 100_000_000)?;
    let events = batch_exits(&l, Start::Ensemble(&qsd.particles), &cfg, &windows, 5000, 0)?;
    let taus: Vec<f64> = events.iter().filter(|e| !e.censored).map(|e| e.tau).collect();
    let ks = exponentiality_test(&taus, 0.01)?;
    let ind = independence_test(&events, window_index(&windows, "sigma2"))?;
    Ok((
        ks.pass && ind.z.abs() < 3.0,
        format!(
            "QSD converged at t = {:.2}; KS D = {:.4} vs critical {:.4}; independence z = {:.3} (|z| < 3)",
            qsd.time, ks.statistic, ks.critical, ind.z
        ),
    ))
}

fn criterion_6() -> Check {
    let l = caps(0.1);
    let inv = find_boundary_minima(&l, 4000)?;
    let windows = default_windows(&l);
    let sigma1 = window_index(&windows, "sigma1");
    let dt = 1e-3;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, h) in [0.5, 0.6].into_iter().enumerate() {
        let mut q = QsdConfig::new(20_000, dt, h, SEED + 10 + k as u64);
        q.max_time = 200.0;
        let qsd = sample_qsd(&l, &q)?;
        let cfg = SimConfig::new(dt, h, SEED + 20 + k as u64, 1_000_000_000)?;
        let events = batch_exits(&l, Start::Ensemble(&qsd.particles), &cfg, &windows, 100_000, 0)?;
        let s = summarize(&events, windows.len(), None)?;
        let est = empirical_rate(&s, sigma1)?;
        let k1 = rate(&TheoryContext::new(inv.clone(), h)?, 1)?;
        let diff = (est.k.ln() - k1.ln()).abs();
        let tol = 3.0 * est.se / est.k + 0.5 * h;
        pass &= diff < tol;
        parts.push(format!("h={h}: k̂₁ = {:.5} ± {:.5}, k₁ = {k1:.5}, |Δln k| = {diff:.4} < {tol:.4}", est.k, est.se));
    }
    Ok((pass, format!("dt = {dt}; {}", parts.join("; "))))
}

fn criterion_7() -> Check {
    let l = caps(0.1);
    let ctx = TheoryContext::new(find_boundary_minima(&l, 4000)?, 0.5)?;
    let table = table_from_landscape(&ctx, &["beyond_z1".into(), "beyond_z2".into()])?;
    let total = table.outflow(0);
    let n = 100_000u64;
    let factory = StreamFactory::new(SEED);
    let mut sum = 0.0;
    let mut counts = [0u64; 3];
    for jump in 0..n {
        let (t, j) = jump_sample(&table, 0, &factory, 0, jump)?;
        sum += t;
        counts[j] += 1;
    }
    let mean = sum / n as f64;
    let expect = 1.0 / total;
    let mut pass = (mean - expect).abs() < 3.0 * expect / (n as f64).sqrt();
    let mut detail = format!("mean residence {mean:.4} vs {expect:.4}");
    for (j, &c) in counts.iter().enumerate().skip(1) {
        let p = table.rate(0, j) / total;
        let f = c as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        pass &= (f - p).abs() < 3.0 * sigma;
        detail.push_str(&format!("; P(next = {j}) {f:.4} vs {p:.4} (3σ = {:.4})", 3.0 * sigma));
    }
    pass &= counts[0] == 0;
    Ok((pass, detail))
}

fn sample_in(l: &Landscape, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = l.domain().bounding_box();
    loop {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
        if l.domain().contains(&x) {
            return x;
        }
    }
}

fn criterion_8() -> Check {
    let mut notes = Vec::new();
    let mut pass = true;

    // (a) annulus bound and the a < 1/9 threshold
    let l = caps(0.1);
    let b = lower_bound_annulus(&l, &[-1.0, 0.0], 1.0 / 3.0, 2.0 / 3.0, None, &AnnulusOptions::default())?;
    let a_ok = (b.bound - 2.0 / 9.0).abs() < 1e-12;
    let mut thresholds = Vec::new();
    for a in [0.02, 0.05, 0.08, 0.1, 0.11, 0.111] {
        let la = caps(a);
        let inv = find_boundary_minima(&la, 4000)?;
        let e = check_hypo1(&la, &inv, Hypo1Method::Annulus, &Hypo1Options::default())?;
        let z2 = e.iter().find(|e| e.i == 2).ok_or("no entry for z2")?;
        thresholds.push(z2.bound / 2.0);
        pass &= z2.verdict == Verdict::Pass && (z2.threshold - 2.0 * a).abs() < 1e-9;
    }
    let th_ok = thresholds.iter().all(|t| (t - 1.0 / 9.0).abs() < 1e-9);
    pass &= a_ok && th_ok;
    notes.push(format!(
        "(a) bound {:.15} vs 2/9, implied threshold a < {:.12} ({})",
        b.bound,
        thresholds[0],
        if a_ok && th_ok { "ok" } else { "mismatch" }
    ));

    // (b) inequalities on random pairs
    let res = 0.02;
    let mesh = AgmonMesh::build(&l, res)?;
    let g_max = mesh.max_g();
    let tol = res * g_max;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_lo, mut worst_hi, mut worst_tri) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..200 {
        let x = sample_in(&l, &mut rng);
        let y = sample_in(&l, &mut rng);
        let z = sample_in(&l, &mut rng);
        let d = |p: &[f64], q: &[f64]| -> Result<f64, Box<dyn Error>> {
            let mesh_d = mesh.distance(&l, p, q)?.upper;
            Ok(mesh_d.min(path_length(&l, &[p.to_vec(), q.to_vec()])?))
        };
        let dxy = d(&x, &y)?;
        let df = (l.f(&x) - l.f(&y)).abs();
        let e = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        worst_lo = worst_lo.min(dxy - (df - tol));
        worst_hi = worst_hi.min(g_max * e + tol - dxy);
        worst_tri = worst_tri.min(dxy + d(&y, &z)? + 2.0 * tol - d(&x, &z)?);
    }
    let b_ok = worst_lo >= 0.0 && worst_hi >= 0.0 && worst_tri >= 0.0;
    pass &= b_ok;
    notes
        .push(format!("(b) tol {tol:.4}: min slack lower {worst_lo:.4}, upper {worst_hi:.4}, triangle {worst_tri:.4}"));

    // (c) d(x0, y) = f(y) − f(x0) near the minimum
    let x0 = [0.05, 0.0];
    let mut worst = 0.0f64;
    for y in [[0.3, 0.0], [0.05, 0.3], [-0.2, -0.2], [0.4, 0.3], [0.25, -0.35]] {
        let exact = l.f(&y) - l.f(&x0);
        let d = distance_upper(&l, &x0, &y, 0.01)?.upper;
        worst = worst.max((d - exact).abs() / exact);
    }
    pass &= worst < 0.02;
    notes.push(format!("(c) worst relative error {worst:.4}"));

    // (d) hypo1 verdicts
    let v_caps = analyse(&l)?.hypo1_verdict();
    let v_corniche = analyse(&make_builtin_landscape("corniche", &BTreeMap::new())?)?.hypo1_verdict();
    pass &= v_caps == "pass" && v_corniche == "fail";
    notes.push(format!("(d) caps {v_caps}, corniche {v_corniche}"));
    Ok((pass, notes.join("; ")))
}

fn criterion_9() -> Check {
    let l = caps(0.1);
    let inv = find_boundary_minima(&l, 4000)?;
    let mut worst_rate = 0.0f64;
    for h in [0.25, 0.5, 1.0] {
        let ctx = TheoryContext::new(inv.clone(), h)?;
        for i in 1..=inv.n0 {
            let lhs = exit_probability(&ctx, i)? * principal_eigenvalue(&ctx);
            let k = rate(&ctx, i)?;
            worst_rate = worst_rate.max((lhs / k - 1.0).abs());
        }
    }

    let ys = 0.2f64.sqrt();
    let window = WindowSpec {
        label: "upper-right".into(),
        kind: WindowKind::Generic {
            f_star: 1.1,
            z_star: vec![1.0, ys],
            dn_f_zstar: 1.9,
            dn_partial_sigma_f_zstar: -2.0 * ys,
            det_hess_partial_sigma: 1.0,
        },
    };
    let scaled: Vec<f64> = [0.25, 0.5, 1.0]
        .iter()
        .map(|&h| {
            let ctx = TheoryContext::new(inv.clone(), h).unwrap();
            exit_probability_window(&ctx, &window).unwrap() / exit_probability(&ctx, 2).unwrap() / h.sqrt()
        })
        .collect();
    let worst_sqrt = scaled.iter().map(|r| (r / scaled[0] - 1.0).abs()).fold(0.0, f64::max);

    let density = ExitDensity::new(&l, 0.5, 10_000)?;
    let BoundaryRep::Curve(curve) = l.domain().boundary() else { return Err("boundary is not a curve".into()) };
    let n = 20_000;
    let ds = curve.length() / n as f64;
    let total: f64 = (0..n)
        .map(|k| {
            let s = k as f64 * ds;
            let v = |u: f64| density.density(&curve.point(u));
            ds / 6.0 * (v(s) + 4.0 * v(s + 0.5 * ds) + v(s + ds))
        })
        .sum();
    let mass_err = (total - 1.0).abs();
    Ok((
        worst_rate < 1e-12 && worst_sqrt < 1e-12 && mass_err < 1e-6,
        format!(
            "p·λ/k − 1: {worst_rate:.2e}; window ratio/√h spread: {worst_sqrt:.2e}; density mass − 1: {mass_err:.2e}"
        ),
    ))
}

fn csv_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, Box<dyn Error>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p)?);
        }
    }
    Ok(out)
}

fn criterion_10() -> Check {
    let base = out_root().join("res1_w1");
    if !base.join("fit.csv").exists() {
        run_experiment(&figure_config("res1")?, &base)?;
    }
    let manifest = RunConfig::from_file(&base.join("manifest.toml"))?;
    let reference = csv_files(&base)?;
    let mut pass = !reference.is_empty();
    let mut notes = vec![format!("{} CSV files at 1 worker", reference.len())];
    for workers in [4, 8] {
        let mut cfg = manifest.clone();
        cfg.simulation.workers = workers;
        let dir = out_root().join(format!("res1_w{workers}"));
        run_experiment(&cfg, &dir)?;
        let other = csv_files(&dir)?;
        let differing: Vec<&String> = reference.keys().filter(|k| other.get(*k) != reference.get(*k)).collect();
        pass &= differing.is_empty() && other.len() == reference.len();
        notes.push(format!("{workers} workers: {} differing", differing.len()));
    }
    Ok((pass, notes.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Check); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    fs::create_dir_all(out_root()).expect("create acceptance output directory");
    let mut failures = 0;
    for (n, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {n:>2}: {} ({:.1} s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
