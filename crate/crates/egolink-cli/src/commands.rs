//! Subcommand implementations. Each one loads its inputs, runs the library,
//! writes its primary outputs, and leaves a run manifest next to them.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;

use egolink::association::{masked_affinity, AssociationConfig};
use egolink::curation::{curate, CurationRules};
use egolink::eval::{evaluate, EvalOptions, EvalReport};
use egolink::metadata::{parse_camera_log, CameraTrajectory, LogFormat};
use egolink::simulate::{export_dataset, generate_scenario, ScenarioConfig};
use egolink::tracks::{read_tracklets, write_tracklets, Tracklet};

use crate::error::{CliError, IntoCliError};
use crate::manifest::RunManifest;

pub fn simulate(config: &Path, out: &Path, overwrite: bool) -> Result<(), CliError> {
    let started = Instant::now();
    let scenario: ScenarioConfig = read_toml(config)?;
    log::info!("generating scenario with seed {}", scenario.rng_seed);
    let world = generate_scenario(&scenario).map_err(IntoCliError::into_cli_error)?;
    export_dataset(&world, out, overwrite).map_err(IntoCliError::into_cli_error)?;
    log::info!(
        "wrote {} tracklets and {} camera logs to {}",
        world.tracklets.len() + world.distractors.len(),
        world.cameras.len(),
        out.display()
    );

    let mut manifest = RunManifest::new("simulate", to_json(&scenario));
    manifest.record_input(config)?;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.write_next_to(out)
}

pub fn curate_cmd(
    rules_path: &Path,
    input: &Path,
    out: &Path,
    report_path: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    let rules: CurationRules = read_toml(rules_path)?;
    let tracklets = read_tracklets_file(input)?;
    let (kept, report) = curate(tracklets, &rules).map_err(IntoCliError::into_cli_error)?;
    log::info!("curated {} -> {} tracklets", report.input_tracklets, report.output_tracklets);

    let mut file = fs::File::create(out).map_err(|e| CliError::io(e.to_string(), out))?;
    write_tracklets(&kept, &mut file).map_err(IntoCliError::into_cli_error)?;
    write_json(report_path, &report)?;

    let mut manifest = RunManifest::new("curate", to_json(&rules));
    manifest.record_input(rules_path)?;
    manifest.record_input(input)?;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.write_next_to(out)
}

pub fn associate(
    tracklets_path: &Path,
    cameras_dir: &Path,
    config_path: &Path,
    queries_arg: &str,
    camera_format: LogFormat,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg: AssociationConfig = read_toml(config_path)?;
    let corpus = read_tracklets_file(tracklets_path)?;
    let cameras = read_camera_dir(cameras_dir, camera_format)?;
    let queries = resolve_queries(&corpus, queries_arg)?;
    log::info!("scoring {} queries against {} gallery tracklets", queries.len(), corpus.len());
    let matrix =
        masked_affinity(&queries, &corpus, &cameras, &cfg).map_err(IntoCliError::into_cli_error)?;
    write_json(out, &matrix)?;

    let mut manifest = RunManifest::new("associate", to_json(&cfg));
    manifest.record_input(config_path)?;
    manifest.record_input(tracklets_path)?;
    manifest.record_input_dir(cameras_dir)?;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.write_next_to(out)
}

pub fn evaluate_cmd(
    tracklets_path: &Path,
    cameras_dir: &Path,
    config_path: &Path,
    protocol: &str,
    camera_format: LogFormat,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    if protocol != "cross-camera" {
        return Err(CliError::validation(format!(
            "unknown protocol '{protocol}' (supported: cross-camera)"
        )));
    }
    let cfg: AssociationConfig = read_toml(config_path)?;
    let corpus = read_tracklets_file(tracklets_path)?;
    let cameras = read_camera_dir(cameras_dir, camera_format)?;
    let report = evaluate(&corpus, &cameras, &cfg, &EvalOptions::default())
        .map_err(IntoCliError::into_cli_error)?;
    log::info!("evaluated {} queries: mAP {:.4}", report.num_valid_queries, report.map);
    write_json(out, &report)?;

    let mut manifest = RunManifest::new("evaluate", to_json(&cfg));
    manifest.record_input(config_path)?;
    manifest.record_input(tracklets_path)?;
    manifest.record_input_dir(cameras_dir)?;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.write_next_to(out)
}

pub fn report_cmd(input: &Path, plot: &Path) -> Result<(), CliError> {
    let report: EvalReport = read_json(input)?;
    if report.per_query.is_empty() {
        return Err(CliError::validation("report contains no per-query results"));
    }
    let svg = crate::plot::cmc_svg(&report)?;
    fs::write(plot, svg).map_err(|e| CliError::io(e.to_string(), plot))?;
    print!("{}", crate::plot::metric_table(&report));
    Ok(())
}

/// "all-cross-camera" selects every labeled tracklet with a same-identity
/// tracklet in another camera; anything else is a file of track ids, one
/// per line.
fn resolve_queries(corpus: &[Tracklet], arg: &str) -> Result<Vec<Tracklet>, CliError> {
    if arg == "all-cross-camera" {
        return Ok(corpus
            .iter()
            .filter(|t| t.person_id.is_some())
            .filter(|t| {
                corpus.iter().any(|g| {
                    g.track_id != t.track_id
                        && g.camera_id != t.camera_id
                        && g.person_id == t.person_id
                })
            })
            .cloned()
            .collect());
    }
    let path = PathBuf::from(arg);
    let body = fs::read_to_string(&path).map_err(|e| CliError::io(e.to_string(), &path))?;
    let mut queries = Vec::new();
    for id in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let t = corpus
            .iter()
            .find(|t| t.track_id == id)
            .ok_or_else(|| CliError::validation(format!("query id '{id}' not in the corpus")))?;
        queries.push(t.clone());
    }
    Ok(queries)
}

fn read_camera_dir(dir: &Path, format: LogFormat) -> Result<Vec<CameraTrajectory>, CliError> {
    let extension = match format {
        LogFormat::Csv => "csv",
        LogFormat::JsonLines => "jsonl",
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(e.to_string(), dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == extension))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::validation(format!(
            "no .{extension} camera logs in '{}'",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|p| {
            let camera_id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let file = fs::File::open(&p).map_err(|e| CliError::io(e.to_string(), &p))?;
            parse_camera_log(BufReader::new(file), format, &camera_id)
                .map_err(|e| CliError::in_file(e, &p))
        })
        .collect()
}

fn read_tracklets_file(path: &Path) -> Result<Vec<Tracklet>, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(e.to_string(), path))?;
    read_tracklets(BufReader::new(file)).map_err(|e| CliError::in_file(e, path))
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let body = fs::read_to_string(path).map_err(|e| CliError::io(e.to_string(), path))?;
    toml::from_str(&body).map_err(|e| CliError::in_file(e.into_cli_error(), path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let body = fs::read(path).map_err(|e| CliError::io(e.to_string(), path))?;
    serde_json::from_slice(&body)
        .map_err(|e| CliError::in_file(CliError::validation(e.to_string()), path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_vec_pretty(value).expect("output serializes");
    body.push(b'\n');
    fs::write(path, body).map_err(|e| CliError::io(e.to_string(), path))
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config serializes")
}

impl IntoCliError for toml::de::Error {
    fn into_cli_error(self) -> CliError {
        CliError::validation(self.to_string())
    }
}

impl IntoCliError for CliError {
    fn into_cli_error(self) -> CliError {
        self
    }
}
