use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn exitlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exitlab")).args(args).env("EXITLAB_OUTPUT_DIR", out).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn oracle1d_prints_exact_and_asymptotic() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        exitlab(&["oracle1d", "--f-coeffs", "0,0,1", "--z1", "-1", "--z2", "2", "--x", "0", "--h", "0.6"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("exact,asymptotic,regime"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    let exact: f64 = fields[0].parse().unwrap();
    let laplace = 2.0 * (-6.0f64 / 0.6).exp();
    assert!((exact - laplace).abs() < 0.3 * laplace, "{exact} vs {laplace}");
    let asym: f64 = fields[1].parse().unwrap();
    assert!((asym - laplace).abs() < 1e-12 * laplace, "{asym} vs {laplace}");
    assert_eq!(fields[2], "below");
}

#[test]
fn rates_writes_two_by_two_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = exitlab(&["rates", "--param", "a=0.1", "--h-grid", "0.4,0.5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "h,i,barrier,prefactor,k_theory,lambda_h,p_exit_theory");
    assert_eq!(rows.len(), 5);
    let k: f64 = rows[3].split(',').nth(4).unwrap().parse().unwrap();
    assert!((k - 0.058).abs() < 1e-3, "{k}");
}

#[test]
fn agmon_annulus_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = exitlab(&["agmon", "--param", "a=0.1", "--method", "annulus"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("agmon.csv")).unwrap();
    let bound: f64 = text.lines().nth(1).unwrap().split(',').next_back().unwrap().parse().unwrap();
    assert!((bound - 2.0 / 9.0).abs() < 1e-9, "{bound}");
}

#[test]
fn agmon_dijkstra_brackets_distance() {
    let dir = tempfile::tempdir().unwrap();
    let o = exitlab(&["agmon", "--param", "a=0.1", "--from", "0,0", "--to", "1,0", "--resolution", "0.05"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("agmon.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,x1,y0,y1,lower,upper,witness_length,resolution");
    let f: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert!(f[4] <= f[5]);
    assert!(f[4] > 0.85 && f[5] < 0.95, "{:?}", f);
}

#[test]
fn config_errors_exit_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[potential]\nname = \"quadratic-disc-caps\"\n[simulation]\ndtt = 1.0\n").unwrap();
    let o = exitlab(&["rates", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("simulation.dtt"), "{}", stderr(&o));

    let o = exitlab(&["rates", "--param", "a=0.5"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = exitlab(&["rates", "--param", "zeta=1"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_event_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[potential]\nname = \"quadratic-disc-caps\"\na = 0.1\n").unwrap();
    let missing = format!("1.0={}", dir.path().join("none.csv").display());
    let o = exitlab(&["exit-dist", "--config", cfg.to_str().unwrap(), "--events", &missing], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn check_hypotheses_reports_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = exitlab(&["check-hypotheses", "--param", "a=0.1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("H1: pass") && text.contains("hypo2: pass"), "{text}");
    assert!(text.contains("hypo1 z2: pass"), "{text}");
    assert!(dir.path().join("hypo1.csv").exists());
}

#[test]
fn kmc_run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["kmc-run", "--param", "a=0.1", "--h", "0.5", "--trajectories", "5", "--seed", "9"];
    assert!(exitlab(&args, a.path()).status.success());
    assert!(exitlab(&args, b.path()).status.success());
    let ta = fs::read(a.path().join("trajectories.csv")).unwrap();
    assert_eq!(ta, fs::read(b.path().join("trajectories.csv")).unwrap());
    let table = fs::read_to_string(a.path().join("rate_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn reproduce_figure_round_trips_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let small = ["--samples-scale", "0.005", "--particles-scale", "0.05", "--h-grid", "1.0,0.8,0.67"];
    let mut args = vec!["reproduce-figure", "res1", "--events"];
    args.extend(small);
    let o = exitlab(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("res1");
    for f in ["manifest.toml", "fg.csv", "fit.csv", "summary.csv", "rates.csv", "hypo1.csv", "events_0.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let again = dir.path().join("again");
    let o = exitlab(
        &[
            "reproduce-figure",
            "--manifest",
            run.join("manifest.toml").to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(run.join("fg.csv")).unwrap(), fs::read(again.join("res1/fg.csv")).unwrap());

    let events: Vec<String> = (0..3)
        .zip(["1.0", "0.8", "0.67"])
        .map(|(k, h)| format!("{h}={}", run.join(format!("events_{k}.csv")).display()))
        .collect();
    let ed = dir.path().join("ed");
    let manifest = run.join("manifest.toml");
    let mut args = vec!["exit-dist", "--config", manifest.to_str().unwrap(), "--out", ed.to_str().unwrap()];
    for e in &events {
        args.extend(["--events", e.as_str()]);
    }
    let o = exitlab(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let fg = |p: &Path| -> Vec<String> {
        fs::read_to_string(p).unwrap().lines().map(|l| l.split(',').take(5).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(fg(&ed.join("fg.csv")), fg(&run.join("fg.csv")));
}

#[test]
fn unknown_recipe_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = exitlab(&["reproduce-figure", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
