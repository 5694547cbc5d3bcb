//! End-to-end checks of the binary: exit codes, field-named config errors,
//! manifest integrity, and reproducibility of emitted bytes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ganflow"))
}

fn write_config(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

const TOY_CONFIG: &str = r#"{
  "experiment": "toy",
  "seed": 1,
  "toy": {
    "gamma_c": 1.0, "g0": 1.0, "omega0": 0.5,
    "dt": 0.01, "horizon": 5.0, "constrained": false
  }
}"#;

#[test]
fn toy_run_succeeds_and_emits_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "toy.json", TOY_CONFIG);
    let out = dir.path().join("out");
    let status = bin()
        .args(["toy", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for entry in files {
        let path = entry["path"].as_str().unwrap();
        assert!(out.join(path).exists(), "manifest names a missing file");
        assert_eq!(entry["sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn malformed_numeric_field_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{
          "experiment": "train",
          "seed": 1,
          "dims": {"k": 1, "l": 1},
          "particles": {"n": 4, "m": 4},
          "target": {"kind": "atomic", "atoms": [{"point": [0.0], "weight": 1.0}]},
          "sgd": {"h": 0.5, "n_c": 0, "steps": 10}
        }"#,
    );
    let output = bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("sgd.n_c"), "stderr was: {stderr}");
}

#[test]
fn unknown_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "typo.json",
        r#"{
          "experiment": "toy",
          "seed": 1,
          "toy": {
            "gamma_c": 1.0, "g0": 1.0, "omega0": 0.5,
            "dt": 0.01, "horizon": 5.0, "constrained": false,
            "horzion": 2.0
          }
        }"#,
    );
    let output = bin()
        .args(["toy", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("horzion"), "stderr was: {stderr}");
}

#[test]
fn subcommand_config_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "toy.json", TOY_CONFIG);
    let output = bin()
        .args(["train", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_4() {
    let output = bin()
        .args(["toy", "--config", "/nonexistent/nowhere.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn seed_override_changes_outputs_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "train.json",
        r#"{
          "experiment": "train",
          "seed": 5,
          "dims": {"k": 1, "l": 1},
          "particles": {"n": 6, "m": 6},
          "target": {"kind": "atomic", "atoms": [
            {"point": [-1.0], "weight": 0.5},
            {"point": [1.0], "weight": 0.5}
          ]},
          "sgd": {"h": 0.5, "n_c": 1, "steps": 40}
        }"#,
    );
    let run = |out: &Path, seed: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["train", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(out);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.status().unwrap().success());
        std::fs::read_to_string(out.join("diagnostics.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"), None);
    let b = run(&dir.path().join("b"), None);
    let c = run(&dir.path().join("c"), Some("99"));
    assert_eq!(a, b, "same seed must reproduce bytes");
    assert_ne!(a, c, "different seed must change the run");
}
