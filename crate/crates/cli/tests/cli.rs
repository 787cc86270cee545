use std::path::{Path, PathBuf};
use std::process::Command;

use beltflow_cli::{dispatch, requested_threads};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["beltflow"];
    full.extend_from_slice(args);
    let code = dispatch(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn shipped(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.display().to_string()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        "domain = 0 0 0.32 0.32\ngrid.dx = 0.02\nscheme = roe\nepsilon = 0.83\n\
         field.preset = uniform\nfield.v_T = 0.42\n\
         initial.bump = 0.1 0.16 0.02 0.03\nt_end = 0.06\noutput_every = 0.02\n{extra}"
    );
    let path = dir.join("small.cfg");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn cfl_table_matches_reference_steps() {
    let (code, out, _) = run(&["cfl", "--config", &shipped("bench.cfg")]);
    assert_eq!(code, 0);
    let expected = [("roe", "atan", 2.37e-4), ("lxf", "atan", 1.21e-4), ("roe", "poly", 1.63e-3), ("lxf", "poly", 9.50e-4)];
    for (scheme, h, dt) in expected {
        let line = out
            .lines()
            .find(|l| l.split_whitespace().take(2).eq([scheme, h]))
            .unwrap_or_else(|| panic!("no {scheme}/{h} row in\n{out}"));
        let value: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
        assert!((value / dt - 1.0).abs() < 0.06, "{line}");
    }
}

#[test]
fn run_writes_outputs_that_pass_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let (code, out, err) = run(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("scheme roe"));
    for f in ["diagnostics.csv", "bounds.csv", "manifest.txt"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let (code, out, _) = run(&["check", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.starts_with("ok:"));
}

#[test]
fn zero_datum_runs_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(small_config(dir.path(), "")).unwrap();
    let path = dir.path().join("zero.cfg");
    let text: String = text.lines().filter(|l| !l.starts_with("initial.bump")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, text).unwrap();
    let (code, out, err) = run(&["run", "--config", path.to_str().unwrap(), "--quiet"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.is_empty());
}

#[test]
fn tampered_mass_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "diagnostics.snapshots = false\n");
    let out_dir = dir.path().join("out");
    assert_eq!(run(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--quiet"]).0, 0);
    let csv_path = out_dir.join("diagnostics.csv");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[2].split(',').map(String::from).collect();
    let mass: f64 = cols[1].parse().unwrap();
    cols[1] = format!("{:.16e}", mass * 1.001);
    lines[2] = cols.join(",");
    std::fs::write(&csv_path, lines.join("\n") + "\n").unwrap();
    let (code, out, _) = run(&["check", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.contains("violation") && out.contains("mass"), "{out}");
}

#[test]
fn scheme_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let (code, out, _) = run(&["run", "--config", &cfg, "--scheme", "lxf"]);
    assert_eq!(code, 0);
    assert!(out.contains("scheme lxf"));
}

#[test]
fn usage_and_validation_errors_exit_one() {
    assert_eq!(run(&["run", "--bogus"]).0, 1);
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "epsilon = -1\n");
    let (code, _, err) = run(&["run", "--config", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("error"), "{err}");
    let (code, _, _) = run(&["run", "--config", &small_config(dir.path(), ""), "--scheme", "upwind"]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&["run", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_ne!(code, 0);
}

#[test]
fn check_on_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["check", "--out", dir.path().join("nothing").to_str().unwrap()]);
    assert_ne!(code, 0);
    assert!(!err.is_empty());
}

#[test]
fn thread_variable_is_validated() {
    assert_eq!(requested_threads(None), Ok(None));
    assert_eq!(requested_threads(Some("3")), Ok(Some(3)));
    assert!(requested_threads(Some("0")).is_err());
    assert!(requested_threads(Some("many")).is_err());
}

#[test]
fn binary_honours_thread_variable() {
    let bin = env!("CARGO_BIN_EXE_beltflow");
    let status = Command::new(bin).env("BELTFLOW_THREADS", "zero").arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let status = Command::new(bin)
        .env("BELTFLOW_THREADS", "2")
        .args(["cfl", "--config", &shipped("bench.cfg")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).contains("lxf"));
}
