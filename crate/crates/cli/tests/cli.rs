use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn dpotts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpotts")).args(args).output().unwrap()
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

#[test]
fn thresholds_exit_zero_and_print_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpotts(&["thresholds", "--config", &cfg("thresholds.toml"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("regime_all = true"));
    assert!(dir.path().join("manifest.json").exists());
    assert_eq!(std::fs::read_to_string(dir.path().join("report.txt")).unwrap(), text);
}

#[test]
fn seed_and_out_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpotts(&["pseudo", "--config", &cfg("pseudo.toml"), "--seed", "17", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let written = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(written.contains("seeds = [17]"), "{written}");
    assert!(written.contains("mode = \"pseudo\""));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("17"));
    // Subcommand overrides the mode in the file.
    let dir2 = tempfile::tempdir().unwrap();
    let out = dpotts(&["thresholds", "--config", &cfg("pseudo.toml"), "--out", dir2.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(dir2.path().join("config.toml")).unwrap().contains("mode = \"thresholds\""));
}

#[test]
fn same_invocation_gives_same_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = dpotts(&["enumerate", "--config", &cfg("enumerate.toml"), "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "mode = \"pseudo\"\ngrid.ell = 1.0\ngrid.rho = 0.9\n[model]\nz = 1.0\nq = 2\nbeta = 1.0\nr = 0.04\nR = 1.0\nalpha0 = 0.03\n").unwrap();
    let out = dpotts(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.rho"));
    let out = dpotts(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&bad, "mode = \"pseudo\"\nunknown_key = 3\n").unwrap();
    assert_eq!(dpotts(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn phase_scan_needs_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpotts(&["phase-scan", "--config", &cfg("pseudo.toml"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no scan values"));
}
