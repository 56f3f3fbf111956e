//! End-to-end reproducibility gate for the command-line pipeline.

use std::fs;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn criterion(number: usize, name: &str, body: impl FnOnce() + UnwindSafe) {
    let result = catch_unwind(body);
    let verdict = if result.is_ok() { "pass" } else { "fail" };
    println!("acceptance: criterion {number} ({name}): {verdict}");
    if let Err(payload) = result {
        resume_unwind(payload);
    }
}

fn egolink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egolink")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = egolink(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

const SCENARIO: &str = "\
num_cameras = 3
num_targets = 40
world_extent_m = [2.0, 520.0]
camera_speed_range = [0.0, 0.0]
target_speed_range = [1.3, 1.3]
fov_range_m = 5.0
fov_half_angle_deg = 89.0
duration_s = 240.0
tick_ms = 100
turn_interval_s = 1000.0
heading_choices = [0.0, 180.0]
target_boundary_reflect = false
min_camera_separation_m = 120.0
feature_dim = 32
feature_noise_sigma = 0.05
distractor_count = 1
distractor_feature_overlap = 0.8
rng_seed = 1
";

const RULES: &str = "\
min_frames = 16
max_false_positive_fraction = 0.2
max_detection_occlusion = 0.8
";

const ASSOC: &str = "arrival_slack = 0.5\n";

/// Runs simulate, curate, associate, evaluate, and report under `root`,
/// returning every primary output as (relative path, bytes).
fn run_pipeline(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let p = |name: &str| root.join(name).display().to_string();
    fs::write(root.join("scenario.toml"), SCENARIO).unwrap();
    fs::write(root.join("rules.toml"), RULES).unwrap();
    fs::write(root.join("assoc.toml"), ASSOC).unwrap();

    run_ok(&["simulate", "--config", &p("scenario.toml"), "--out", &p("data")]);
    run_ok(&[
        "curate",
        "--rules",
        &p("rules.toml"),
        "--in",
        &p("data/tracklets.jsonl"),
        "--out",
        &p("curated.jsonl"),
        "--report",
        &p("curation.json"),
    ]);
    run_ok(&[
        "associate",
        "--tracklets",
        &p("curated.jsonl"),
        "--cameras",
        &p("data/cameras"),
        "--config",
        &p("assoc.toml"),
        "--queries",
        "all-cross-camera",
        "--out",
        &p("affinity.json"),
    ]);
    run_ok(&[
        "evaluate",
        "--tracklets",
        &p("curated.jsonl"),
        "--cameras",
        &p("data/cameras"),
        "--config",
        &p("assoc.toml"),
        "--protocol",
        "cross-camera",
        "--out",
        &p("report.json"),
    ]);
    run_ok(&["report", "--in", &p("report.json"), "--plot", &p("cmc.svg")]);

    let mut outputs = Vec::new();
    collect_outputs(root, root, &mut outputs);
    outputs.sort_by(|a, b| a.0.cmp(&b.0));
    outputs
}

fn collect_outputs(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_outputs(root, &path, out);
            continue;
        }
        let rel = path.strip_prefix(root).unwrap().to_path_buf();
        let name = rel.file_name().unwrap().to_string_lossy().into_owned();
        // Manifests carry wall-clock durations; everything else must be
        // byte-identical across runs.
        if name.ends_with("manifest.json") || name.ends_with(".toml") {
            continue;
        }
        out.push((rel, fs::read(&path).unwrap()));
    }
}

#[test]
fn criterion_10_pipeline_reproducibility() {
    criterion(10, "seeded pipeline re-runs byte-identically", || {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let run_a = run_pipeline(dir_a.path());
        let run_b = run_pipeline(dir_b.path());

        let names: Vec<&PathBuf> = run_a.iter().map(|(p, _)| p).collect();
        let expected = [
            "affinity.json",
            "cmc.svg",
            "curated.jsonl",
            "curation.json",
            "data/cameras/cam000.csv",
            "data/cameras/cam001.csv",
            "data/cameras/cam002.csv",
            "data/tracklets.jsonl",
            "report.json",
        ];
        assert_eq!(names, expected.iter().map(PathBuf::from).collect::<Vec<_>>().iter().collect::<Vec<_>>());

        for ((path_a, bytes_a), (path_b, bytes_b)) in run_a.iter().zip(run_b.iter()) {
            assert_eq!(path_a, path_b);
            assert_eq!(bytes_a, bytes_b, "{} differs between runs", path_a.display());
        }
    });
}
