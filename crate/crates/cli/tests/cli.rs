use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nanonmr(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nanonmr"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .current_dir(dir)
        .env_remove("NANONMR_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_report(o: &Output) -> Value {
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(err.lines().last().unwrap()).unwrap_or_else(|e| panic!("{e}: {err}"))
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn correlate_sticky_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&nanonmr(
        dir.path(),
        &["correlate"],
        r#"{"command": "correlate", "model": "sticky", "R": 5, "L": 5, "d": 1, "grid": {"min": 1e-2, "max": 1e3, "per_decade": 2}}"#,
    ));
    let mut lines = out.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# model=sticky R=5.00000000000e0 L=5.00000000000e0 d=1.00000000000e0 tau_ev=none seed=none config="));
    assert!(header.contains(" version="));
    assert_eq!(lines.next(), Some("t_over_TD,G,err"));
    let t = csv_column(&out, "t_over_TD");
    assert_eq!(t.len(), 11);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    let first = out.lines().nth(2).unwrap().split(',').next().unwrap();
    assert_eq!(first, "1.00000000000e-2");
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": "evaporating", "R": 2, "L": 3, "tau_ev": 50, "grid": {"min": 0.1, "max": 100, "per_decade": 3}}"#;
    let a = stdout(&nanonmr(dir.path(), &["correlate"], cfg));
    let b = stdout(&nanonmr(dir.path(), &["correlate"], cfg));
    assert_eq!(a, b);
    let c = stdout(&nanonmr(dir.path(), &["correlate"], &cfg.replace("50", "60")));
    assert_ne!(a.lines().next(), c.lines().next(), "config hash must change");
}

#[test]
fn semantic_error_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = nanonmr(dir.path(), &["correlate"], r#"{"model": "sticky", "R": -1, "L": 5}"#);
    assert_eq!(o.status.code(), Some(2));
    let r = error_report(&o);
    assert_eq!(r["status"], "error");
    assert_eq!(r["kind"], "config");
    assert_eq!(r["key"], "R");
    assert_eq!(r["command"], "correlate");
}

#[test]
fn syntax_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let r = error_report(&nanonmr(dir.path(), &["correlate"], "{\n \"model\": \"sticky\",\n \"R\": 5\n \"L\": 5}"));
    assert_eq!(r["kind"], "config");
    assert_eq!(r["line"], 4);
}

#[test]
fn unknown_command_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = nanonmr(dir.path(), &["plot"], "{}");
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["kind"], "usage");
}

#[test]
fn physical_units_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let o = nanonmr(
        dir.path(),
        &["correlate"],
        r#"{"model": "free", "R": 75, "L": 75, "d": 15, "length_unit": "nm", "D": 1e-9, "grid": {"min": 1, "max": 10, "per_decade": 1}}"#,
    );
    stdout(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("T_D = 2.250000e-7 s"));
}

#[test]
fn plateau_map_has_unit_ratio_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let o = nanonmr(
        dir.path(),
        &["plateau-map", "--out", "map.csv"],
        r#"{"d": 15, "length_unit": "nm", "map": {"R_min": 5, "R_max": 50, "L_min": 5, "L_max": 50, "points": 8}, "output": {"gnuplot": true}}"#,
    );
    stdout(&o);
    let text = fs::read_to_string(dir.path().join("map.csv")).unwrap();
    let ratio = csv_column(&text, "ratio");
    assert_eq!(ratio.len(), 64);
    assert!(ratio.iter().any(|&r| r > 1.0) && ratio.iter().any(|&r| r < 1.0));
    let script = fs::read_to_string(dir.path().join("map.gp")).unwrap();
    assert!(script.contains("'map.csv'") && script.contains("levels discrete 1"));
}

#[test]
fn json_output_and_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&nanonmr(
        dir.path(),
        &["correlate", "--format", "json", "--out", "evap.json"],
        r#"{"model": "evaporating", "R": 5, "L": 5, "tau_ev": 1000, "grid": {"min": 0.01, "max": 1e4, "per_decade": 10}}"#,
    ));
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("evap.json")).unwrap()).unwrap();
    assert_eq!(doc["model"], "evaporating");
    assert_eq!(doc["t_over_TD"].as_array().unwrap().len(), 61);
    let out = stdout(&nanonmr(dir.path(), &["fit"], r#"{"input": "evap.json"}"#));
    let row = out.lines().find(|l| l.starts_with("tau_ev_eff,")).unwrap();
    let tau: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    // (tau_ev/d)(V/S) = 1250 for R = L = 5
    assert!((tau / 1250.0 - 1.0).abs() < 0.25, "{tau}");
}

#[test]
fn fit_rejects_mixed_models() {
    let dir = tempfile::tempdir().unwrap();
    let a = stdout(&nanonmr(dir.path(), &["correlate"], r#"{"model": "reflective", "R": 2, "L": 2, "grid": {"min": 0.1, "max": 10, "per_decade": 2}}"#));
    let b = stdout(&nanonmr(dir.path(), &["correlate"], r#"{"model": "free", "R": 2, "L": 2, "grid": {"min": 0.1, "max": 10, "per_decade": 2}}"#));
    fs::write(dir.path().join("mixed.csv"), format!("{a}{b}")).unwrap();
    let o = nanonmr(dir.path(), &["fit"], r#"{"input": "mixed.csv"}"#);
    assert_eq!(o.status.code(), Some(1));
    assert!(error_report(&o)["message"].as_str().unwrap().contains("one model per file"));
}

#[test]
fn mc_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": "evaporating", "R": 2, "L": 2, "tau_ev": 10, "seed": 11,
                  "grid": {"min": 0.01, "max": 0.1, "per_decade": 2}, "mc": {"particles": 200, "realizations": 4, "dt": 1e-3}}"#;
    let one = stdout(&nanonmr(dir.path(), &["mc", "--threads", "1"], cfg));
    let two = stdout(&nanonmr(dir.path(), &["mc", "--threads", "3"], cfg));
    assert_eq!(one, two);
    assert!(one.starts_with("# model=monte-carlo") && one.contains("seed=11"));
    let other = stdout(&nanonmr(dir.path(), &["mc", "--seed", "12"], cfg));
    assert_ne!(one, other);
}

#[test]
fn compare_reports_z_scores() {
    let dir = tempfile::tempdir().unwrap();
    let o = nanonmr(
        dir.path(),
        &["compare", "--out", "cmp.csv"],
        r#"{"model": "reflective", "R": 2, "L": 2, "seed": 3, "grid": {"min": 0.01, "max": 1, "per_decade": 3},
            "mc": {"particles": 1000, "realizations": 8, "dt": 1e-3}, "output": {"gnuplot": true}}"#,
    );
    stdout(&o);
    let text = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let z = csv_column(&text, "z");
    assert_eq!(z.len(), 7);
    let max = z.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(text.lines().next().unwrap().contains(&format!("max_abs_z={:.11e}", max)));
    assert!(max < 4.0, "{max}");
    assert!(dir.path().join("cmp.gp").exists());
}

#[test]
fn eigen_and_dominance_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&nanonmr(dir.path(), &["eigen"], r#"{"R": 5, "L": 5, "tau_ev": 1000, "truncation": {"m": 4, "p": 4}}"#));
    let tau = csv_column(&out, "tau");
    assert_eq!(tau.len(), 32);
    assert!(tau.windows(2).all(|w| w[0] >= w[1]));
    let out = stdout(&nanonmr(
        dir.path(),
        &["dominance-map"],
        r#"{"tau_ev": 1000, "map": {"R_min": 0.5, "R_max": 20, "L_min": 0.5, "L_max": 20, "points": 5}}"#,
    ));
    assert!(out.contains("radial") && out.contains("odd-axial"));
    let rel = csv_column(&out, "rel_diff");
    assert!(rel.iter().all(|r| r.abs() < 0.1));
}

#[test]
fn fisher_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&nanonmr(dir.path(), &["fisher", "--format", "json"], r#"{"R": 5, "L": 5, "tau_ev": 1000, "fisher": {"delta": 0}}"#));
    let doc: Value = serde_json::from_str(&out).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    let get = |k: &str| rows.iter().find(|r| r[0] == k).unwrap()[1].clone();
    assert_eq!(get("direct"), 0.0);
    assert_eq!(get("closed_full"), 0.0);
}

#[test]
fn degenerate_map_has_one_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = nanonmr(dir.path(), &["plateau-map", "--out", "x.csv"], r#"{"map": {"R_min": 1, "R_max": 1, "L_min": 1, "L_max": 1, "points": 2}}"#);
    stdout(&o);
    let text = fs::read_to_string(dir.path().join("x.csv")).unwrap();
    assert_eq!(csv_column(&text, "ratio").len(), 1);
}
