//! End-to-end checks of the command-line binary: exit codes, artifact
//! layout, and byte-determinism of the run summary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermovisco"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const SMALL: &str = "\
[grid]
nx = 5
ny = 5
[scheme]
eps = 0.5
tau = 0.125
t_end = 0.25
[[loads.body]]
direction = [0.0, -1.0]
signal = { kind = \"ramp\", slope = 0.4 }
";

#[test]
fn check_material_passes_on_defaults() {
    let out = bin().arg("check-material").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"), "{text}");
}

#[test]
fn simulate_writes_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, SMALL);
    let mut summaries = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = bin()
            .args(["--config", cfg.to_str().unwrap()])
            .args(["--out", out_dir.to_str().unwrap()])
            .arg("simulate")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        for name in ["summary.json", "ledger.csv", "config.resolved.toml"] {
            assert!(out_dir.join(name).exists(), "missing {name}");
        }
        summaries.push(fs::read(out_dir.join("summary.json")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1], "summary.json not byte-identical");
}

#[test]
fn resolved_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, SMALL);
    let first = dir.path().join("first");
    let status = bin()
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out", first.to_str().unwrap()])
        .arg("simulate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    // feeding the resolved config back in reproduces the run byte for byte
    let second = dir.path().join("second");
    let resolved = first.join("config.resolved.toml");
    let status = bin()
        .args(["--config", resolved.to_str().unwrap()])
        .args(["--out", second.to_str().unwrap()])
        .arg("simulate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(
        fs::read(first.join("summary.json")).unwrap(),
        fs::read(second.join("summary.json")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("ledger.csv")).unwrap(),
        fs::read(second.join("ledger.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // malformed TOML
    let bad = dir.path().join("bad.toml");
    write(&bad, "[scheme\neps = 0.5\n");
    let out = bin()
        .args(["--config", bad.to_str().unwrap()])
        .arg("simulate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    // invalid field value
    let bad2 = dir.path().join("bad2.toml");
    write(&bad2, "[scheme]\neps = 2.0\n");
    let out = bin()
        .args(["--config", bad2.to_str().unwrap()])
        .arg("simulate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    // unknown subcommand / flag is a usage error
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn short_study_ladder_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(
        &cfg,
        &format!("{SMALL}[study]\ntau = [0.125, 0.0625]\n"),
    );
    let out = bin()
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out", dir.path().join("s").to_str().unwrap()])
        .args(["study", "--kind", "tau"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn solver_failure_exits_3_and_records_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    // load violent enough to break the determinant constraint quickly
    write(
        &cfg,
        "[grid]\nnx = 5\nny = 5\n[scheme]\neps = 1.0\ntau = 0.25\nt_end = 0.5\n\
         max_iter_mech = 40\n\
         [[loads.body]]\ndirection = [0.0, -1.0]\n\
         signal = { kind = \"constant\", value = 500.0 }\n",
    );
    let out_dir = dir.path().join("fail");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out", out_dir.to_str().unwrap()])
        .arg("simulate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("error"), "{summary}");
}
