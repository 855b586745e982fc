use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn kslab(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kslab"));
    cmd.args(args)
        .env_remove("KSLAB_OUTPUT_ROOT")
        .env("RUST_LOG", "warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const ZERO_RUN: &str = r#"
mode = "nd_run"
[params]
n = 2
a = 1.0
[grid]
points = 16
[initial]
kind = "zero"
[stop]
t_max = 0.2
dt_max = 0.1
"#;

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn invalid_config_exits_with_the_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "mode = \"nd_run\"\n[params]\nn = 2\n[blowup]\ndelta = 1.5\ndelta_ = 0.1\n",
    );
    let out = kslab(&["validate", &cfg], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["params.a", "blowup.delta", "delta_"] {
        assert!(err.contains(needle), "{err}");
    }
    assert_eq!(
        kslab(&["run", "/nonexistent/config.toml"], &[])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn validate_echoes_resolved_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", ZERO_RUN);
    let out = kslab(&["validate", &cfg], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gradient_factor = 50.0"), "{text}");
}

#[test]
fn zero_run_is_clean_and_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero.toml", ZERO_RUN);
    let out_dir = tmp.path().join("out");
    let out = kslab(&["run", &cfg, "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let m = manifest(&out_dir);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["stop_reason"], "time_limit");
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|e| e["path"] == "series.csv"));
    for e in outputs {
        let bytes = fs::read(out_dir.join(e["path"].as_str().unwrap())).unwrap();
        assert_eq!(e["bytes"].as_u64().unwrap(), bytes.len() as u64);
        let hash: String = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(e["sha256"].as_str().unwrap(), hash);
    }

    let csv = fs::read_to_string(out_dir.join("series.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "sup_grad").unwrap();
    for line in lines {
        assert_eq!(
            line.split(',').nth(col).unwrap().parse::<f64>().unwrap(),
            0.0
        );
    }
}

#[test]
fn output_root_variable_is_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{ZERO_RUN}[output]\ndir = \"nested/run\"\n");
    let cfg = write_config(tmp.path(), "zero.toml", &text);
    let out = kslab(&["run", &cfg], &[("KSLAB_OUTPUT_ROOT", tmp.path())]);
    assert!(out.status.success());
    assert!(tmp.path().join("nested/run/manifest.json").exists());
}

#[test]
fn runs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ZERO_RUN.replace("kind = \"zero\"", "kind = \"bump\"");
    let cfg = write_config(tmp.path(), "bump.toml", &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = kslab(
            &[
                "--threads",
                "1",
                "run",
                &cfg,
                "--out",
                dir.to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success());
    }
    assert_eq!(
        fs::read(a.join("series.csv")).unwrap(),
        fs::read(b.join("series.csv")).unwrap()
    );
}

#[test]
fn radial_bump_run_reports_the_gradient_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "radial.toml",
        "mode = \"radial_run\"\n[params]\nn = 2\na = 1.0\n[radial]\nmarkers = 128\n[initial]\nsharpness = 4.0\n",
    );
    let dir = tmp.path().join("radial");
    let out = kslab(&["run", &cfg, "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(
        out.status.code(),
        Some(10),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(&dir);
    assert_eq!(m["stop_reason"], "gradient_threshold");
    let bound = m["predicted_blowup_bound"].as_f64().unwrap();
    let observed = m["threshold_time"].as_f64().unwrap();
    assert!(observed > 0.0 && observed <= bound);
}

#[test]
fn limit_report_run_writes_the_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "limit.toml",
        "mode = \"limit_report\"\n[params]\nn = 2\na = 1.0\n[grid]\npoints = 32\n[limit]\na_values = [0.0, 1.0, 4.0]\n",
    );
    let dir = tmp.path().join("limit");
    let out = kslab(&["run", &cfg, "--out", dir.to_str().unwrap()], &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(dir.join("limit_report.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(dir.join("limit_report.dat").exists());
}
