//! End-to-end checks of the binary: artifact layout, validation exit
//! codes, override handling, and rerun idempotence.

use std::path::Path;
use std::process::{Command, Output};

fn spinbus(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinbus"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

const SMALL_TRACE: &str = r#"
seed = 42

[model]
geometry = "chain"
n = 3
attach = [1, 3]
lambda = 0.1

[grid]
window = [0.0, 150.0]
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn trace_writes_csv_optimum_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_TRACE);
    let out = spinbus(
        &["trace", "--config", &config, "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,f_b\n"));
    assert!(trace.lines().count() > 100);
    let optimum = std::fs::read_to_string(run.join("optimum.json")).unwrap();
    assert!(optimum.contains("model_fingerprint"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "trace");
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn reruns_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_TRACE);
    let run = |threads: &str| {
        let out = spinbus(
            &[
                "trace", "--config", &config, "--out", "run", "--threads", threads,
            ],
            dir.path(),
        );
        assert!(out.status.success());
        let dirp = dir.path().join("run");
        (
            std::fs::read(dirp.join("trace.csv")).unwrap(),
            std::fs::read(dirp.join("optimum.json")).unwrap(),
            std::fs::read(dirp.join("manifest.json")).unwrap(),
        )
    };
    let first = run("1");
    let repeat = run("1");
    // Same invocation: everything byte-identical, manifest included.
    assert_eq!(first.0, repeat.0);
    assert_eq!(first.1, repeat.1);
    assert_eq!(first.2, repeat.2);
    // Different worker count: artifacts unchanged; manifest differs only
    // in the recorded thread count.
    let second = run("4");
    assert_eq!(first.0, second.0);
    assert_eq!(first.1, second.1);
    let m1 = String::from_utf8(first.2).unwrap();
    let m2 = String::from_utf8(second.2).unwrap();
    let strip_threads = |s: &str| -> String {
        s.lines().filter(|l| !l.contains("\"threads\"")).collect()
    };
    assert_eq!(strip_threads(&m1), strip_threads(&m2));
}

#[test]
fn malformed_config_exits_nonzero_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "seed = [this is not toml");
    let out = spinbus(
        &["trace", "--config", &config, "--out", "run"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{SMALL_TRACE}\nmystery = 1\n"));
    let out = spinbus(
        &["trace", "--config", &config, "--out", "run"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mystery"), "{err}");
}

#[test]
fn overrides_change_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_TRACE);
    let hash_of = |out_dir: &str, overrides: &[&str]| -> String {
        let mut args = vec!["optimum", "--config", &config, "--out", out_dir];
        for o in overrides {
            args.push("--set");
            args.push(o);
        }
        let out = spinbus(&args, dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(out_dir).join("manifest.json")).unwrap(),
        )
        .unwrap();
        manifest["config_hash"].as_str().unwrap().to_owned()
    };
    let base = hash_of("a", &[]);
    let same = hash_of("b", &[]);
    let changed = hash_of("c", &["model.lambda=0.05"]);
    assert_eq!(base, same);
    assert_ne!(base, changed);
    // Overriding a nonexistent key fails validation.
    let out = spinbus(
        &[
            "optimum", "--config", &config, "--out", "d", "--set", "model.nope=1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_lists_every_level_by_sector() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
seed = 1

[model]
geometry = "chain"
n = 4
attach = [1, 4]
lambda = 0.1
"#,
    );
    let out = spinbus(
        &["spectrum", "--config", &config, "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("run/spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sector_sz,index,energy"));
    // 16 levels across the 5 Sz sectors of a 4-site bus.
    assert_eq!(csv.lines().count(), 17);
    let sectors: std::collections::BTreeSet<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(sectors.len(), 5);
}

#[test]
fn effective_reports_parity_appropriate_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_TRACE);
    let out = spinbus(
        &["effective", "--config", &config, "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run/effective.json")).unwrap(),
    )
    .unwrap();
    // Odd bus: central-spin couplings with moments.
    assert!(json.get("j_star_a").is_some());
    assert!(json.get("mixed_parity").is_some());
}
