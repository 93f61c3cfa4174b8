use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn dnm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnm")).args(args).output().unwrap()
}

fn csv_rows(text: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text);
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn classify(name: &str) -> Value {
    let out = dnm(&["classify", "--config", &fixture(name)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn transport_theta_is_constant() {
    let out = dnm(&["analyze", "--config", &fixture("transport.json")]);
    assert!(out.status.success());
    let (h, rows) = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 51);
    let theta = column(&h, &rows, "theta");
    assert!(theta.iter().all(|&x| (x - theta[0]).abs() <= 1e-12));
    assert!(column(&h, &rows, "theta_dot").iter().all(|x| x.abs() <= 1e-9));
    let (q1, q2) = (column(&h, &rows, "q1_eq"), column(&h, &rows, "q2_eq"));
    // k ends at 1.5, so the spacing ends at (2/1.5)^(1/3)
    let last = rows.len() - 1;
    assert!((q1[last] - q2[last] - (2.0f64 / 1.5).cbrt()).abs() < 1e-12);
}

#[test]
fn rotation_theta_follows_the_angle() {
    let out = dnm(&["analyze", "--config", &fixture("rotation.json")]);
    let (h, rows) = csv_rows(&out.stdout);
    let t = column(&h, &rows, "t");
    let theta = column(&h, &rows, "theta");
    for (t, th) in t.iter().zip(&theta) {
        assert!((th - 0.3 * t).abs() < 1e-10, "t={t}: theta={th}");
    }
    let w1 = column(&h, &rows, "omega1_sq");
    assert!(w1.iter().all(|w| (w - 4.0).abs() < 1e-12));
}

#[test]
fn classify_reports_analytic_cases() {
    assert_eq!(classify("springs_uncoupled.json")["analytic_case"], "k=0");
    let transport = classify("transport.json");
    assert_eq!(transport["analytic_case"], "k1=k2=k");
    assert_eq!(transport["separable"], true);
    let gate = classify("phase_gate_sweep.json");
    assert_eq!(gate["separable"], false);
    assert!(gate["analytic_case"].is_null());
    let rot = classify("rotation.json");
    assert_eq!(rot["separable"], false);
    assert!((rot["max_abs_theta_dot"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn sweep_rows_follow_the_axis() {
    let out = dnm(&["sweep", "--config", &fixture("phase_gate_sweep.json")]);
    assert!(out.status.success());
    let (h, rows) = csv_rows(&out.stdout);
    assert_eq!(&h[..3], ["point", "f1_final", "separable"]);
    assert_eq!(column(&h, &rows, "f1_final"), vec![0.0, 0.05, 0.1, 0.2, 0.4]);
    let sep: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(sep, ["true", "false", "false", "false", "false"]);
    let rate = column(&h, &rows, "max_abs_theta_dot");
    assert!(rate.windows(2).all(|w| w[0] < w[1]), "{rate:?}");

    let out = dnm(&["sweep", "--config", &fixture("transport.json")]);
    let (h, rows) = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 10);
    assert_eq!(column(&h, &rows, "m1").last(), Some(&10.0));
}

#[test]
fn simulate_writes_both_frames_and_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let prefix: PathBuf = dir.path().join("rot");
    let p = prefix.to_string_lossy();
    let out = dnm(&["simulate", "--config", &fixture("rotation.json"), "--out", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lab = std::fs::read(format!("{p}_lab.csv")).unwrap();
    let (h, rows) = csv_rows(&lab);
    assert_eq!(h, ["t", "q1", "q2", "p1", "p2", "frame"]);
    assert_eq!(rows.len(), 501);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.3);
    let mode = std::fs::read(format!("{p}_mode.csv")).unwrap();
    assert_eq!(csv_rows(&mode).0[1], "Q1");
    let report: Value = serde_json::from_slice(&std::fs::read(format!("{p}_report.json")).unwrap()).unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["steps"], 500);
}

#[test]
fn simulate_needs_a_step_size() {
    let out = dnm(&["simulate", "--config", &fixture("springs_uncoupled.json"), "--out", "/nonexistent/x"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s").to_string_lossy().into_owned();
    let out = dnm(&["simulate", "--config", &fixture("springs_uncoupled.json"), "--dt", "0.01", "--out", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn samples_override() {
    let out = dnm(&["analyze", "--config", &fixture("springs_uncoupled.json"), "--samples", "5"]);
    assert_eq!(csv_rows(&out.stdout).1.len(), 5);
}
