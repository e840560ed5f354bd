use std::path::Path;
use std::process::{Command, Output};

fn ptomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptomo")).args(args).output().expect("spawn ptomo")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn exact_run_writes_hashed_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("maps");
    let res = ptomo(&["reduced-maps", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let table = read(&out.join("reduced_maps.csv"));
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "map,fidelity_to_ideal,tomography_fidelity,trace_preservation_error");
    assert!(out.join("chi_reduced_cz_eym.txt").exists());
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "process = \"cnot-cz\"\ntheta_grid = [0.0]\n").unwrap();
    let out = dir.path().join("nm");
    let res = ptomo(&[
        "nonmarkov",
        "--config",
        cfg.to_str().unwrap(),
        "--theta-grid",
        "0,1.5707963267948966",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let table = read(&out.join("nonmarkov.csv"));
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    let n: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((n - std::f64::consts::LN_2).abs() < 0.02, "{n}");
    assert!(String::from_utf8_lossy(&res.stdout).contains("peak N"));
}

#[test]
fn bad_configuration_exits_2() {
    assert_eq!(ptomo(&["tomo-predict", "--shots", "10"]).status.code(), Some(2));
    assert_eq!(ptomo(&["tomo-predict", "--process", "swap"]).status.code(), Some(2));
    assert_eq!(ptomo(&["volume", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let res = ptomo(&["reduced-maps", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn sampled_nonmarkov_reports_support_mismatch_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nm");
    let res = ptomo(&[
        "nonmarkov",
        "--shots",
        "3000",
        "--seed",
        "5",
        "--noise-gamma",
        "0.01",
        "--noise-lambda",
        "0.01",
        "--theta-grid",
        "0.7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("support-mismatch"));
    assert!(read(&out.join("nonmarkov.csv")).contains("0.7,,support-mismatch,0"));
}
