use std::fs;
use std::path::Path;
use std::process::Command;

use l0lms::sim::{preset, ExperimentId, PresetOverrides};
use l0lms_cli::{run, Outcome, RunRequest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l0lms"))
}

fn summary_rows(dir: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn exp3_summary_has_one_row_per_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--preset", "exp3", "--runs", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let rows = summary_rows(dir.path());
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], "l0lms_lcn8");
    assert_eq!(rows[5][0], "lms");
    assert!(rows.iter().all(|r| r[3] == "2" && r[4] == "0"));

    let curves = fs::read_to_string(dir.path().join("exp3_curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,l0lms_lcn8,l0lms_lcn16,l0lms_lcn32,l0lms_lcn64,l0lms_lcn128,lms"
    );
    assert_eq!(lines.count(), 10_000);
}

#[test]
fn first_curve_point_is_system_energy() {
    let dir = tempfile::tempdir().unwrap();
    let mut req = RunRequest::new(Some(ExperimentId::Exp2), None, dir.path().into()).unwrap();
    req.runs_override = Some(3);
    run(&req).unwrap();

    let system = &preset(ExperimentId::Exp2, &PresetOverrides::default()).unwrap()[0]
        .trial
        .system;
    let expected = 10.0 * system.energy().log10();
    let text = fs::read_to_string(dir.path().join("exp2_curves.csv")).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row.len(), 3);
    for v in row {
        assert!((v - expected).abs() < 1e-6, "{v} vs {expected}");
    }
}

#[test]
fn linear_output_matches_db() {
    let dir = tempfile::tempdir().unwrap();
    let mut req = RunRequest::new(Some(ExperimentId::Exp2), None, dir.path().join("lin")).unwrap();
    req.runs_override = Some(1);
    req.linear = true;
    let report = run(&req).unwrap();
    let Outcome::Done { curve, .. } = &report.results[0].outcome else {
        panic!("run failed");
    };
    let text = fs::read_to_string(dir.path().join("lin/exp2_curves.csv")).unwrap();
    let v: f64 = text
        .lines()
        .nth(101)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((v / curve.msd[100] - 1.0).abs() < 1e-6);
}

#[test]
fn change_experiment_reports_each_segment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("echo.cfg");
    fs::write(
        &cfg,
        "L = 64\nnoise_var = 1e-3\niterations = 4000\nruns = 2\n\
         [system]\nkind = cluster\ndelay = 4\nspan = 12\n\
         [run]\nchange.at = 2000\nchange.delay = 30\nchange.gain_db = -6\n\
         [algorithm.a]\nvariant = nlms\nmu = 0.5\n\
         [algorithm.b]\nvariant = l0nlms\nmu = 0.5\nkappa = 1e-5\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let status = bin()
        .args(["run", "--systems", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let labels: Vec<String> = summary_rows(&out)
        .into_iter()
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(labels, ["a@0", "a@2000", "b@0", "b@2000"]);
    assert!(out.join("echo_curves.csv").exists());
    assert!(out.join("echo_a_system.csv").exists());
    let meta = fs::read_to_string(out.join("echo_meta.txt")).unwrap();
    assert!(meta.contains("steady_state.window = 1000"));
    assert!(meta.contains("kappa = 1e-5"));
}

#[test]
fn divergence_is_reported_and_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.cfg");
    fs::write(
        &cfg,
        "L = 16\niterations = 3000\nruns = 1\n[signal]\nvariance = 4\n\
         [algorithm.ok]\nvariant = nlms\nmu = 0.5\n\
         [algorithm.bad]\nvariant = lms\nmu = 1.0\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let output = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let rows = summary_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "ok");
    assert!(rows[1][2].contains("diverged"), "{:?}", rows[1]);
    let header = fs::read_to_string(out.join("blowup_curves.csv")).unwrap();
    assert!(header.starts_with("iteration,ok\n"));
}

#[test]
fn bad_invocations_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let both = bin()
        .args(["run", "--preset", "exp2", "--config", "x.cfg", "--out", out])
        .output()
        .unwrap();
    assert!(!both.status.success());
    let neither = bin().args(["run", "--out", out]).output().unwrap();
    assert!(!neither.status.success());
    let unknown = bin()
        .args(["run", "--preset", "exp9", "--out", out])
        .output()
        .unwrap();
    assert!(!unknown.status.success());

    let missing = bin()
        .args(["run", "--config", "/nonexistent/x.cfg", "--out", out])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "L = 8\n[algorithm.x]\nvariant = lms\nmu = -1\n").unwrap();
    let bad = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out", out])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("line 4"), "{msg}");

    let zero = bin()
        .args(["run", "--preset", "exp2", "--runs", "0", "--out", out])
        .output()
        .unwrap();
    assert_eq!(zero.status.code(), Some(2));
}
