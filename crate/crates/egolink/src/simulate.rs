//! Kinematic world simulator: moving cameras and pedestrians on a local
//! tangent plane, field-of-view-gated tracklet generation and synthetic
//! appearance features.
//!
//! Positions are simulated in meters on a plane anchored at a GPS origin and
//! converted to degrees with the spherical small-angle factors, so the
//! ground truth uses exact Euclidean kinematics while the exported corpus
//! exercises the engine's spherical geodesy. The generated world is a pure
//! function of the scenario config, seed included.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::EARTH_RADIUS_M;
use crate::metadata::{write_camera_log, CameraStateSample, CameraTrajectory, LogFormat, MetadataError};
use crate::tracks::{write_tracklets, Detection, RegionFeatures, TrackError, Tracklet};
use crate::{Bearing, GeoPoint};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("output directory '{0}' already exists (pass overwrite to replace)")]
    OutputExists(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error(transparent)]
    Track(#[from] TrackError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_cameras: usize,
    pub num_targets: usize,
    /// World extent in meters, `[x, y]`.
    pub world_extent_m: [f64; 2],
    /// `[min, max]` m/s.
    pub camera_speed_range: [f64; 2],
    /// `[min, max]` m/s.
    pub target_speed_range: [f64; 2],
    /// Visibility radius in meters.
    pub fov_range_m: f64,
    /// Half-angle of the visibility cone around the camera heading;
    /// 180 makes cameras omnidirectional.
    pub fov_half_angle_deg: f64,
    pub duration_s: f64,
    pub tick_ms: u64,
    /// Entities re-draw heading and speed every this many seconds.
    pub turn_interval_s: f64,
    /// When set, headings are drawn from this list instead of uniformly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heading_choices: Option<Vec<f64>>,
    /// Targets bounce off the world boundary like cameras do; disable to
    /// let them walk out (and keep their headings constant forever).
    pub target_boundary_reflect: bool,
    /// Minimum distance between camera starting positions.
    pub min_camera_separation_m: f64,
    /// Visible runs shorter than this many ticks emit no tracklet.
    pub min_tracklet_ticks: usize,
    pub feature_dim: usize,
    pub feature_noise_sigma: f64,
    /// Extra gallery-only tracklets per identity.
    pub distractor_count: usize,
    /// 0 gives distractors independent feature prototypes; 1 copies the
    /// identity's prototype.
    pub distractor_feature_overlap: f64,
    pub origin_longitude: f64,
    pub origin_latitude: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_cameras: 4,
            num_targets: 10,
            world_extent_m: [200.0, 200.0],
            camera_speed_range: [0.0, 0.5],
            target_speed_range: [1.3, 1.3],
            fov_range_m: 20.0,
            fov_half_angle_deg: 180.0,
            duration_s: 120.0,
            tick_ms: 100,
            turn_interval_s: 1_000_000.0,
            heading_choices: None,
            target_boundary_reflect: true,
            min_camera_separation_m: 0.0,
            min_tracklet_ticks: 16,
            feature_dim: 32,
            feature_noise_sigma: 0.0,
            distractor_count: 0,
            distractor_feature_overlap: 0.0,
            origin_longitude: 0.0,
            origin_latitude: 0.0,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    // Negated comparisons reject NaN along with out-of-range values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::InvalidConfig(m));
        if self.num_cameras == 0 || self.num_targets == 0 {
            return fail("num_cameras and num_targets must be positive".into());
        }
        if !(self.world_extent_m.iter().all(|v| *v > 0.0)) {
            return fail("world extent must be positive".into());
        }
        for (name, r) in [("camera_speed_range", self.camera_speed_range), ("target_speed_range", self.target_speed_range)] {
            if !(r[0] >= 0.0 && r[1] >= r[0]) {
                return fail(format!("{name} must be ordered and non-negative"));
            }
        }
        if !(self.fov_range_m >= 0.0) {
            return fail("fov_range_m must be >= 0".into());
        }
        if !(self.fov_half_angle_deg > 0.0 && self.fov_half_angle_deg <= 180.0) {
            return fail("fov_half_angle_deg must be in (0, 180]".into());
        }
        if self.tick_ms == 0 || !(self.duration_s > 0.0) {
            return fail("duration and tick must be positive".into());
        }
        let duration_ms = (self.duration_s * 1000.0).round() as u64;
        if !duration_ms.is_multiple_of(self.tick_ms) {
            return fail(format!("tick {} ms does not divide duration {} ms", self.tick_ms, duration_ms));
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be positive".into());
        }
        if !(self.feature_noise_sigma >= 0.0) {
            return fail("feature_noise_sigma must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.distractor_feature_overlap) {
            return fail("distractor_feature_overlap must be in [0,1]".into());
        }
        if self.min_tracklet_ticks < 2 {
            return fail("min_tracklet_ticks must be >= 2".into());
        }
        Ok(())
    }

    fn num_ticks(&self) -> usize {
        ((self.duration_s * 1000.0).round() as u64 / self.tick_ms) as usize + 1
    }
}

/// One entity's ground-truth state at a tick, in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneState {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
    pub speed_mps: f64,
}

/// A maximal visible run that became a tracklet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityInterval {
    pub target: usize,
    pub camera_id: String,
    pub tracklet_id: String,
    pub start_ms: i64,
    pub end_ms: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldLog {
    pub config: ScenarioConfig,
    pub cameras: Vec<CameraTrajectory>,
    /// Tracklets emitted from actual visibility, aligned with `intervals`.
    pub tracklets: Vec<Tracklet>,
    pub intervals: Vec<VisibilityInterval>,
    /// Gallery-only synthetic tracklets with no underlying target path.
    pub distractors: Vec<Tracklet>,
    /// Ground-truth target states per tick.
    pub target_paths: Vec<Vec<PlaneState>>,
}

pub fn camera_name(index: usize) -> String {
    format!("cam{index:03}")
}

pub fn person_name(index: usize) -> String {
    format!("p{index:04}")
}

fn meters_to_geo(cfg: &ScenarioConfig, x_m: f64, y_m: f64) -> GeoPoint {
    let lat = cfg.origin_latitude + (y_m / EARTH_RADIUS_M).to_degrees();
    let lon = cfg.origin_longitude
        + (x_m / (EARTH_RADIUS_M * cfg.origin_latitude.to_radians().cos())).to_degrees();
    GeoPoint::new(lon, lat).expect("simulated worlds stay far from the poles")
}

fn draw_heading(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> f64 {
    match &cfg.heading_choices {
        Some(choices) => choices[rng.gen_range(0..choices.len())],
        None => rng.gen_range(0.0..360.0),
    }
}

fn draw_speed(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.gen_range(range[0]..=range[1])
    }
}

/// Advances one straight tick. If the step would leave the world the
/// heading reflects *before* moving, so every step has full length and
/// consecutive samples always imply the configured speed.
fn step(state: &mut PlaneState, cfg: &ScenarioConfig, dt_s: f64, reflect: bool) {
    let step_of = |heading_deg: f64, s: &PlaneState| {
        let r = heading_deg.to_radians();
        (s.x_m + s.speed_mps * dt_s * r.sin(), s.y_m + s.speed_mps * dt_s * r.cos())
    };
    let in_world = |x: f64, y: f64| {
        (0.0..=cfg.world_extent_m[0]).contains(&x) && (0.0..=cfg.world_extent_m[1]).contains(&y)
    };
    let (mut nx, mut ny) = step_of(state.heading_deg, state);
    if reflect && !in_world(nx, ny) {
        let mut h = state.heading_deg;
        if !(0.0..=cfg.world_extent_m[0]).contains(&nx) {
            h = (360.0 - h).rem_euclid(360.0);
        }
        let (_, ty) = step_of(h, state);
        if !(0.0..=cfg.world_extent_m[1]).contains(&ty) {
            h = (180.0 - h).rem_euclid(360.0);
        }
        state.heading_deg = h;
        let stepped = step_of(h, state);
        nx = stepped.0;
        ny = stepped.1;
        if !in_world(nx, ny) {
            // cornered; head for the world center
            let cx = cfg.world_extent_m[0] / 2.0 - state.x_m;
            let cy = cfg.world_extent_m[1] / 2.0 - state.y_m;
            state.heading_deg = cx.atan2(cy).to_degrees().rem_euclid(360.0);
            let stepped = step_of(state.heading_deg, state);
            nx = stepped.0;
            ny = stepped.1;
        }
    }
    state.x_m = nx;
    state.y_m = ny;
}

fn simulate_path(
    rng: &mut ChaCha8Rng,
    cfg: &ScenarioConfig,
    start: (f64, f64),
    speed_range: [f64; 2],
    reflect: bool,
) -> Vec<PlaneState> {
    let dt_s = cfg.tick_ms as f64 / 1000.0;
    let turn_ticks = ((cfg.turn_interval_s / dt_s).round() as usize).max(1);
    let mut state = PlaneState {
        x_m: start.0,
        y_m: start.1,
        heading_deg: draw_heading(rng, cfg),
        speed_mps: draw_speed(rng, speed_range),
    };
    let mut path = Vec::with_capacity(cfg.num_ticks());
    path.push(state);
    for tick in 1..cfg.num_ticks() {
        if tick % turn_ticks == 0 {
            state.heading_deg = draw_heading(rng, cfg);
            state.speed_mps = draw_speed(rng, speed_range);
        }
        step(&mut state, cfg, dt_s, reflect);
        path.push(state);
    }
    path
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v.into_iter().map(|x| x as f32).collect()
}

fn noisy(rng: &mut ChaCha8Rng, prototype: &[f32], sigma: f64) -> Vec<f32> {
    prototype
        .iter()
        .map(|&p| {
            let n: f64 = StandardNormal.sample(rng);
            (p as f64 + sigma * n) as f32
        })
        .collect()
}

fn region_features(rng: &mut ChaCha8Rng, prototypes: &[Vec<f32>; 4], sigma: f64) -> RegionFeatures {
    RegionFeatures {
        gf: Some(noisy(rng, &prototypes[0], sigma)),
        fb: Some(noisy(rng, &prototypes[1], sigma)),
        ub: Some(noisy(rng, &prototypes[2], sigma)),
        lb: Some(noisy(rng, &prototypes[3], sigma)),
    }
}

/// Apparent bbox height of a pedestrian `dist_m` away, pinhole-ish.
fn apparent_height(dist_m: f64) -> f64 {
    (2000.0 / dist_m.max(1.0)).clamp(5.0, 800.0)
}

/// Deterministically generates a world from the scenario config.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<WorldLog, SimError> {
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut camera_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let mut target_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let mut feature_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let mut distractor_rng = ChaCha8Rng::seed_from_u64(master.gen());

    // camera starting positions, optionally separated
    let mut camera_starts: Vec<(f64, f64)> = Vec::with_capacity(cfg.num_cameras);
    for i in 0..cfg.num_cameras {
        let mut pos = (0.0, 0.0);
        let mut ok = false;
        for _ in 0..10_000 {
            pos = (
                camera_rng.gen_range(0.0..cfg.world_extent_m[0]),
                camera_rng.gen_range(0.0..cfg.world_extent_m[1]),
            );
            ok = camera_starts.iter().all(|p| {
                let (dx, dy) = (p.0 - pos.0, p.1 - pos.1);
                (dx * dx + dy * dy).sqrt() >= cfg.min_camera_separation_m
            });
            if ok {
                break;
            }
        }
        if !ok {
            return Err(SimError::InvalidConfig(format!(
                "could not place camera {i} with min separation {} m in a {:?} m world",
                cfg.min_camera_separation_m, cfg.world_extent_m
            )));
        }
        camera_starts.push(pos);
    }
    let camera_paths: Vec<Vec<PlaneState>> = camera_starts
        .into_iter()
        .map(|start| simulate_path(&mut camera_rng, cfg, start, cfg.camera_speed_range, true))
        .collect();

    let target_paths: Vec<Vec<PlaneState>> = (0..cfg.num_targets)
        .map(|_| {
            let start = (
                target_rng.gen_range(0.0..cfg.world_extent_m[0]),
                target_rng.gen_range(0.0..cfg.world_extent_m[1]),
            );
            simulate_path(
                &mut target_rng,
                cfg,
                start,
                cfg.target_speed_range,
                cfg.target_boundary_reflect,
            )
        })
        .collect();

    // camera logs in the engine's own format
    let cameras: Vec<CameraTrajectory> = camera_paths
        .iter()
        .enumerate()
        .map(|(c, path)| {
            let samples = path
                .iter()
                .enumerate()
                .map(|(tick, s)| CameraStateSample {
                    timestamp_ms: tick as i64 * cfg.tick_ms as i64,
                    position: meters_to_geo(cfg, s.x_m, s.y_m),
                    heading: Bearing::new(s.heading_deg),
                    speed_mps: s.speed_mps,
                })
                .collect();
            CameraTrajectory::new(camera_name(c), samples, BTreeMap::new())
                .expect("simulated logs are well formed")
        })
        .collect();

    // identity feature prototypes, drawn up front so tracklet count does
    // not perturb the stream
    let prototypes: Vec<[Vec<f32>; 4]> = (0..cfg.num_targets)
        .map(|_| {
            [
                unit_vector(&mut feature_rng, cfg.feature_dim),
                unit_vector(&mut feature_rng, cfg.feature_dim),
                unit_vector(&mut feature_rng, cfg.feature_dim),
                unit_vector(&mut feature_rng, cfg.feature_dim),
            ]
        })
        .collect();

    // FOV-gated visibility runs become tracklets
    let half_angle = cfg.fov_half_angle_deg;
    let mut tracklets = Vec::new();
    let mut intervals = Vec::new();
    for (target, path) in target_paths.iter().enumerate() {
        for (cam_idx, cam_path) in camera_paths.iter().enumerate() {
            let mut run_start: Option<usize> = None;
            let mut heights: Vec<f64> = Vec::new();
            for tick in 0..cfg.num_ticks() {
                let t = &path[tick];
                let c = &cam_path[tick];
                let (dx, dy) = (t.x_m - c.x_m, t.y_m - c.y_m);
                let dist = (dx * dx + dy * dy).sqrt();
                let mut visible = dist <= cfg.fov_range_m;
                if visible && half_angle < 180.0 && dist > 1e-9 {
                    let toward = dx.atan2(dy).to_degrees().rem_euclid(360.0);
                    let diff = (toward - c.heading_deg).rem_euclid(360.0);
                    let diff = diff.min(360.0 - diff);
                    visible = diff <= half_angle;
                }
                if visible {
                    if run_start.is_none() {
                        run_start = Some(tick);
                        heights.clear();
                    }
                    heights.push(apparent_height(dist));
                } else if let Some(start) = run_start.take() {
                    emit_run(cfg, target, cam_idx, start, &heights, &prototypes[target], &mut feature_rng, &mut tracklets, &mut intervals);
                }
            }
            if let Some(start) = run_start.take() {
                emit_run(cfg, target, cam_idx, start, &heights, &prototypes[target], &mut feature_rng, &mut tracklets, &mut intervals);
            }
        }
    }

    // gallery-only distractors colliding (or not) with each identity
    let mut distractors = Vec::new();
    let c = cfg.distractor_feature_overlap;
    for (target, target_protos) in prototypes.iter().enumerate() {
        for k in 0..cfg.distractor_count {
            let mut protos: [Vec<f32>; 4] = Default::default();
            for (r, proto) in protos.iter_mut().enumerate() {
                let g = unit_vector(&mut distractor_rng, cfg.feature_dim);
                let mut mixed: Vec<f64> = g
                    .iter()
                    .zip(&target_protos[r])
                    .map(|(gv, pv)| (1.0 - c) * *gv as f64 + c * *pv as f64)
                    .collect();
                let norm = mixed.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                for x in &mut mixed {
                    *x /= norm;
                }
                *proto = mixed.into_iter().map(|x| x as f32).collect();
            }
            let len_ticks = distractor_rng.gen_range(cfg.min_tracklet_ticks..=cfg.min_tracklet_ticks * 3);
            let start_tick = distractor_rng.gen_range(0..cfg.num_ticks().saturating_sub(len_ticks).max(1));
            let cam = distractor_rng.gen_range(0..cfg.num_cameras);
            let detections = (0..len_ticks)
                .map(|i| Detection {
                    t_ms: (start_tick + i) as i64 * cfg.tick_ms as i64,
                    bbox: [0.0, 0.0, 40.0, 100.0],
                    occluded_fraction: None,
                    is_false_positive: None,
                })
                .collect();
            let features = region_features(&mut distractor_rng, &protos, cfg.feature_noise_sigma);
            distractors.push(Tracklet {
                track_id: format!("dt{target:04}_{k:02}"),
                camera_id: camera_name(cam),
                person_id: Some(format!("d{target:04}_{k:02}")),
                detections,
                features,
            });
        }
    }

    Ok(WorldLog { config: cfg.clone(), cameras, tracklets, intervals, distractors, target_paths })
}

#[allow(clippy::too_many_arguments)]
fn emit_run(
    cfg: &ScenarioConfig,
    target: usize,
    cam_idx: usize,
    start_tick: usize,
    heights: &[f64],
    prototypes: &[Vec<f32>; 4],
    feature_rng: &mut ChaCha8Rng,
    tracklets: &mut Vec<Tracklet>,
    intervals: &mut Vec<VisibilityInterval>,
) {
    if heights.len() < cfg.min_tracklet_ticks {
        return;
    }
    let tracklet_id = format!("t{:05}", tracklets.len());
    let detections: Vec<Detection> = heights
        .iter()
        .enumerate()
        .map(|(i, &h)| Detection {
            t_ms: (start_tick + i) as i64 * cfg.tick_ms as i64,
            bbox: [0.0, 0.0, h * 0.4, h],
            occluded_fraction: None,
            is_false_positive: None,
        })
        .collect();
    let start_ms = detections[0].t_ms;
    let end_ms = detections[detections.len() - 1].t_ms;
    tracklets.push(Tracklet {
        track_id: tracklet_id.clone(),
        camera_id: camera_name(cam_idx),
        person_id: Some(person_name(target)),
        detections,
        features: region_features(feature_rng, prototypes, cfg.feature_noise_sigma),
    });
    intervals.push(VisibilityInterval {
        target,
        camera_id: camera_name(cam_idx),
        tracklet_id,
        start_ms,
        end_ms,
    });
}

impl WorldLog {
    fn interval_of(&self, tracklet_id: &str) -> Option<&VisibilityInterval> {
        self.intervals.iter().find(|iv| iv.tracklet_id == tracklet_id)
    }

    /// Ground truth: the camera (other than the current one) whose next
    /// visibility interval for this target begins earliest after the
    /// tracklet's exit. Ties break toward the smaller camera id.
    pub fn oracle_next_camera(&self, tracklet_id: &str) -> Option<String> {
        let iv = self.interval_of(tracklet_id)?;
        self.intervals
            .iter()
            .filter(|n| {
                n.target == iv.target && n.camera_id != iv.camera_id && n.start_ms > iv.end_ms
            })
            .min_by_key(|n| (n.start_ms, n.camera_id.as_str()))
            .map(|n| n.camera_id.clone())
    }

    /// Ground truth: seconds from the tracklet's exit until the target
    /// actually becomes visible in `camera_id`.
    pub fn oracle_arrival_time(&self, tracklet_id: &str, camera_id: &str) -> Option<f64> {
        let iv = self.interval_of(tracklet_id)?;
        self.intervals
            .iter()
            .filter(|n| n.target == iv.target && n.camera_id == camera_id && n.start_ms > iv.end_ms)
            .map(|n| n.start_ms)
            .min()
            .map(|start| (start - iv.end_ms) as f64 / 1000.0)
    }

    /// All tracklets, real and distractor, in corpus order.
    pub fn corpus(&self) -> Vec<Tracklet> {
        let mut all = self.tracklets.clone();
        all.extend(self.distractors.iter().cloned());
        all
    }
}

/// Writes the world as a corpus in the engine's external formats:
/// `tracklets.jsonl` plus `cameras/<camera_id>.csv`.
pub fn export_dataset(world: &WorldLog, dir: &Path, overwrite: bool) -> Result<(), SimError> {
    if dir.exists() {
        if !overwrite {
            return Err(SimError::OutputExists(dir.display().to_string()));
        }
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir.join("cameras"))?;
    let mut tracklet_file = fs::File::create(dir.join("tracklets.jsonl"))?;
    write_tracklets(&world.corpus(), &mut tracklet_file)?;
    tracklet_file.flush()?;
    for cam in &world.cameras {
        let mut f = fs::File::create(dir.join("cameras").join(format!("{}.csv", cam.camera_id())))?;
        write_camera_log(cam, &mut f, LogFormat::Csv)?;
        f.flush()?;
    }
    Ok(())
}
