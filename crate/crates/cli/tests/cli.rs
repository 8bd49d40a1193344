use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ladder-memory"));
    c.env_remove("LADDER_MEMORY_CONSTANTS");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out").arg(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Vec<PathBuf> {
    let o = run_in(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    v["outputs"].as_array().unwrap().iter().map(|p| PathBuf::from(p.as_str().unwrap())).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().split(',').map(str::to_string).collect();
    (head, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn col(rows: &[Vec<String>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn error_of(o: &Output) -> Value {
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    v["error"].clone()
}

#[test]
fn levels_label_48_states_and_start_at_zero_field() {
    let d = tempfile::tempdir().unwrap();
    let files = ok(d.path(), &["levels", "--field", "0", "0"]);
    let (head, rows) = csv_rows(&files[0]);
    assert_eq!(head, ["field_mt", "manifold", "state_index", "energy_mhz"]);
    assert_eq!(rows.len(), 48);
    let mut idx: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    idx.sort();
    assert_eq!(idx, (1..=48).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r[0] == "0"));
    let s = json(&files[1]);
    assert_eq!(s["provenance"]["command"], "levels");
    assert!(s["result"]["discontinuities"].as_array().unwrap().is_empty());
}

#[test]
fn lines_and_two_photon_spectrum_agree() {
    let d = tempfile::tempdir().unwrap();
    let lines = ok(d.path(), &["lines"]);
    let l = json(&lines[1]);
    let mem = l["result"]["memory_line"]["detuning_ghz"].as_f64().unwrap();
    let spec = ok(d.path(), &["spectrum", "--two-photon"]);
    let s = json(&spec[1]);
    let positions: Vec<f64> = s["result"]["lines"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["two_photon_detuning_ghz"].as_f64().unwrap())
        .collect();
    assert!(positions.iter().any(|p| (p - mem).abs() < 1e-12), "{mem} {positions:?}");
    // every (sigma-, sigma-) line is a storage line, not a loss channel
    let (_, rows) = csv_rows(&lines[0]);
    assert!(rows.iter().all(|r| r[5] == "0"));
}

#[test]
fn zero_depth_spectra_are_flat() {
    let d = tempfile::tempdir().unwrap();
    for kind in ["--one-photon", "--two-photon"] {
        let files = ok(d.path(), &["spectrum", kind, "--depth", "0"]);
        let (_, rows) = csv_rows(&files[0]);
        assert!(col(&rows, 1).iter().all(|&t| t == 1.0), "{kind}");
    }
}

#[test]
fn cavity_scan_summary() {
    let d = tempfile::tempdir().unwrap();
    let files = ok(d.path(), &["cavity", "--scan"]);
    let s = json(&files[1])["result"]["summary"].clone();
    assert!((s["finesse"].as_f64().unwrap() - 9.5).abs() < 0.1, "{s}");
    assert!((s["linewidth_ghz"].as_f64().unwrap() - 0.88).abs() < 0.02, "{s}");
    let (_, rows) = csv_rows(&files[0]);
    let r = col(&rows, 1);
    assert!(r.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn resonance_map_spots_repeat_every_fsr() {
    let d = tempfile::tempdir().unwrap();
    let files = ok(d.path(), &["cavity", "--resmap"]);
    let s = json(&files[1]);
    let fsr = s["result"]["params"]["fsr_ghz"].as_f64().unwrap();
    let mut sig: Vec<f64> =
        s["result"]["pairs"].as_array().unwrap().iter().map(|p| p["signal_detuning_ghz"].as_f64().unwrap()).collect();
    sig.sort_by(f64::total_cmp);
    sig.dedup();
    assert!(sig.len() >= 3);
    for w in sig.windows(2) {
        assert!((w[1] - w[0] - fsr).abs() < 0.1, "{sig:?}");
    }
}

#[test]
fn store_operating_point_and_control_off() {
    let d = tempfile::tempdir().unwrap();
    let files = ok(d.path(), &["store"]);
    let s = json(&files[1])["result"].clone();
    assert!((s["total_efficiency"].as_f64().unwrap() - 0.27).abs() < 0.01, "{s}");
    assert!((s["internal_efficiency"].as_f64().unwrap() - 0.84).abs() < 0.02, "{s}");
    let first = std::fs::read(&files[0]).unwrap();

    // identical inputs give byte-identical files
    let again = ok(d.path(), &["store"]);
    assert_eq!(std::fs::read(&again[0]).unwrap(), first);
    assert_eq!(std::fs::read(&again[1]).unwrap(), std::fs::read(&files[1]).unwrap());

    let off = ok(d.path(), &["store", "--control-off"]);
    let s = json(&off[1])["result"].clone();
    assert_eq!(s["retrieved_counts"].as_f64().unwrap(), 0.0);
    assert_eq!(s["total_efficiency"].as_f64().unwrap(), 0.0);
}

#[test]
fn optimize_zero_generations() {
    let d = tempfile::tempdir().unwrap();
    let files = ok(d.path(), &["optimize", "--generations", "0", "--space", "energy-detuning", "--seed", "3"]);
    let trace = files.iter().find(|p| p.ends_with("optimize_trace.csv")).unwrap();
    let (_, rows) = csv_rows(trace);
    assert_eq!(rows.len(), 24);
    let summary = files.iter().find(|p| p.ends_with("optimize_summary.json")).unwrap();
    assert_eq!(json(summary)["provenance"]["seed"], 3);
}

#[test]
fn fit_round_trip_on_lifetime_data() {
    let d = tempfile::tempdir().unwrap();
    let scan = ok(d.path(), &["scan", "--lifetime"]);
    let csv = scan.iter().find(|p| p.ends_with("scan_lifetime.csv")).unwrap();
    let files = ok(d.path(), &["fit", "--model", "lifetime", csv.to_str().unwrap(), "--y", "internal_efficiency"]);
    let f = json(&files[0])["result"]["fit"].clone();
    assert_eq!(f["converged"], true);
    let names: Vec<&str> = f["names"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(names, ["nu_prime_mhz", "omega_mhz", "a", "b"]);
    // the simulated memory applies the configured dephasing width
    let nu = f["parameters"][0].as_f64().unwrap();
    assert!((nu - 12.6).abs() < 1.0, "{f}");
}

#[test]
fn usage_and_config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["store", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["kind"], "usage");

    let o = run_in(d.path(), &["store", "--set", "memory.cooperativty=10"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["exit_code"], 2);

    let o = run_in(d.path(), &["fit", "--model", "line", "/no/such/file.csv"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, r#"{"cavity": {"r3": 0.5}}"#).unwrap();
    let o = run_in(d.path(), &["--config", cfg.to_str().unwrap(), "cavity", "--scan"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["kind"], "config");
}

#[test]
fn unstable_step_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["store", "--set", "memory.dt_ns=0.05"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_of(&o)["kind"], "numerical");
}

#[test]
fn constants_file_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = bin().args(["levels", "--field", "0", "0", "--out"]).arg(d.path()).env("LADDER_MEMORY_CONSTANTS", d.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    // a copy of the built-in table works and gives the same levels
    let base = ok(d.path(), &["levels", "--field", "0", "10"]);
    let reference = std::fs::read(&base[0]).unwrap();
    let table = d.path().join("rb87.toml");
    std::fs::write(&table, include_str!("../../core/data/rb87.toml")).unwrap();
    let other = d.path().join("env");
    let o = bin()
        .args(["levels", "--field", "0", "10", "--out"])
        .arg(&other)
        .env("LADDER_MEMORY_CONSTANTS", &table)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(other.join("levels.csv")).unwrap(), reference);
}

#[test]
fn config_command_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let files = ok(d.path(), &["config", "--set", "memory.cooperativity=1000", "--seed", "9"]);
    let cfg = files.iter().find(|p| p.ends_with("config.json")).unwrap();
    let doc = json(cfg);
    assert_eq!(doc["memory"]["cooperativity"], 1000.0);
    assert_eq!(doc["seed"], 9);
}
