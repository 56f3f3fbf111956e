//! Exit-code and stderr contract of the binary.

use std::process::{Command, Output};

fn egolink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egolink")).args(args).output().expect("binary runs")
}

#[test]
fn help_exits_zero() {
    let out = egolink(&["--help"]);
    assert!(out.status.success());
}

#[test]
fn missing_input_exits_two_with_json_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let out = egolink(&[
        "simulate",
        "--config",
        &missing.display().to_string(),
        "--out",
        &dir.path().join("data").display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert_eq!(err["kind"], "io");
    assert_eq!(err["path"], missing.display().to_string());
}

#[test]
fn unknown_protocol_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let tracklets = dir.path().join("t.jsonl");
    let cameras = dir.path().join("cams");
    let config = dir.path().join("a.toml");
    std::fs::write(&tracklets, "").unwrap();
    std::fs::create_dir(&cameras).unwrap();
    std::fs::write(&config, "").unwrap();
    let out = egolink(&[
        "evaluate",
        "--tracklets",
        &tracklets.display().to_string(),
        "--cameras",
        &cameras.display().to_string(),
        "--config",
        &config.display().to_string(),
        "--protocol",
        "nearest-camera",
        "--out",
        &dir.path().join("r.json").display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "validation");
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "no_such_knob = 3\n").unwrap();
    let out = egolink(&[
        "simulate",
        "--config",
        &config.display().to_string(),
        "--out",
        &dir.path().join("data").display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "validation");
    assert_eq!(err["path"], config.display().to_string());
}

#[test]
fn simulate_refuses_existing_output_without_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    std::fs::write(&config, "rng_seed = 3\nduration_s = 5.0\n").unwrap();
    let out_dir = dir.path().join("data").display().to_string();
    let first = egolink(&["simulate", "--config", &config.display().to_string(), "--out", &out_dir]);
    assert!(first.status.success());
    let second = egolink(&["simulate", "--config", &config.display().to_string(), "--out", &out_dir]);
    assert_eq!(second.status.code(), Some(2));
    let third = egolink(&[
        "simulate",
        "--config",
        &config.display().to_string(),
        "--out",
        &out_dir,
        "--overwrite",
    ]);
    assert!(third.status.success());
}

#[test]
fn report_rejects_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    std::fs::write(
        &report,
        r#"{"cmc":[],"map":0.0,"per_query":[],"num_valid_queries":0,"num_excluded_queries":0,"pruning":{"total_masked_pairs":0,"fallback_queries":0,"failed_queries":0}}"#,
    )
    .unwrap();
    let out = egolink(&[
        "report",
        "--in",
        &report.display().to_string(),
        "--plot",
        &dir.path().join("c.svg").display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
