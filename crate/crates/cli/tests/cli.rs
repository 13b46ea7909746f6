use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vpdctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpdctl")).args(args).output().expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SHORT: &str = "scenario.preset = desert_2b\nscenario.duration_days = 1\n";

#[test]
fn simulate_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "a.cfg", SHORT);
    let trace = dir.path().join("trace.csv");
    let metrics = dir.path().join("metrics.csv");
    let out = vpdctl(&["simulate", "--config", &cfg, "--out", trace.to_str().unwrap(), "--metrics", metrics.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("clock_s,t_out,rh_out"));
    assert_eq!(lines.count(), 2880);
    let m = fs::read_to_string(&metrics).unwrap();
    assert!(m.starts_with("sigma_vpd,iae"));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), m);
}

#[test]
fn compare_writes_one_row_per_kind_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "a.cfg", SHORT);
    let table = dir.path().join("cmp.csv");
    let out = vpdctl(&["compare", "--config", &cfg, "--kinds", "independent_pid,cascade_nn", "--seeds", "2", "--out", table.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("independent_pid,1,"));
    assert!(rows[3].starts_with("cascade_nn,2,"));
}

#[test]
fn psychro_prints_seven_fields() {
    let out = vpdctl(&["psychro", "--t", "25", "--rh", "60"]);
    assert_eq!(out.status.code(), Some(0));
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<f64> = line.trim().split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields.len(), 7);
    assert!((fields[2] - 3.1678).abs() < 1e-3);
    assert!((fields[3] - 0.4 * fields[2]).abs() < 1e-9);
}

#[test]
fn optimize_reports_setpoint_and_bound() {
    let out = vpdctl(&["optimize", "--t-out", "-5", "--rh-out", "70", "--vpd-target", "1.0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.trim().split(',').collect();
    assert_eq!(fields.len(), 5);
    let t: f64 = fields[0].parse().unwrap();
    let rh: f64 = fields[1].parse().unwrap();
    assert!((18.0..=30.0).contains(&t) && rh > 0.0 && rh < 100.0);
}

#[test]
fn sweep_prints_one_line_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "a.cfg", SHORT);
    let out = vpdctl(&["sweep", "--config", &cfg, "--param", "zone.hum_cap", "--values", "20,40,60"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("zone.hum_cap,sigma_vpd"));
    assert!(lines[2].starts_with("40,"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let trace = trace.to_str().unwrap();
    let unknown = config(dir.path(), "u.cfg", "zone.colour = blue\n");
    let out = vpdctl(&["simulate", "--config", &unknown, "--out", trace]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zone.colour"));
    let bad = config(dir.path(), "b.cfg", "scenario.duration_days = soon\n");
    assert_eq!(vpdctl(&["simulate", "--config", &bad, "--out", trace]).status.code(), Some(2));
    let missing = dir.path().join("none.cfg");
    assert_eq!(vpdctl(&["simulate", "--config", missing.to_str().unwrap(), "--out", trace]).status.code(), Some(2));
    assert_eq!(vpdctl(&["psychro", "--t", "25", "--rh", "140"]).status.code(), Some(2));
    let cfg = config(dir.path(), "a.cfg", SHORT);
    assert_eq!(vpdctl(&["compare", "--config", &cfg, "--kinds", "magic,cascade_nn", "--out", trace]).status.code(), Some(2));
}

#[test]
fn infeasible_target_exits_with_four() {
    let out = vpdctl(&["optimize", "--t-out", "20", "--rh-out", "50", "--vpd-target", "10"]);
    assert_eq!(out.status.code(), Some(4));
}
