//! Cross-camera association: candidate-camera selection, next-camera
//! prediction, time-of-arrival estimation, appearance scoring and temporal
//! masking of the query-gallery affinity matrix.
//!
//! The flow per query: infer the target's exit-time kinematics from its
//! camera's sensors, keep the cameras lying along its heading, pick the
//! closest of those as the predicted next camera, estimate the travel time
//! from distance and relative speed, then zero the affinity of any gallery
//! track that does not enter the predicted camera after the estimated
//! arrival.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{bearing, great_circle_distance, headings_equivalent};
use crate::metadata::{CameraTrajectory, MetadataError};
use crate::tracks::{infer_target_kinematics, RegionFeatures, TargetKinematics, TrackError, Tracklet};

#[derive(Debug, Error)]
pub enum AssociationError {
    #[error("invalid association config: {0}")]
    InvalidConfig(String),
    #[error("feature dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },
    #[error("no feature region present in both tracklets")]
    NoCommonRegions,
    #[error("unknown query '{0}'")]
    UnknownQuery(String),
    #[error("no trajectory for camera '{0}'")]
    UnknownCamera(String),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionWeights {
    pub gf: f64,
    pub fb: f64,
    pub ub: f64,
    pub lb: f64,
}

impl Default for RegionWeights {
    fn default() -> Self {
        Self { gf: 1.0, fb: 1.0, ub: 1.0, lb: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    /// Compass window (degrees) for "same heading" tests.
    pub heading_tolerance: f64,
    /// Assumed target speed, m/s.
    pub walking_speed: f64,
    /// Floor on arrival-time denominators, m/s.
    pub min_relative_speed: f64,
    /// Multiplier on the estimated arrival time used by the gate.
    pub arrival_slack: f64,
    pub region_weights: RegionWeights,
    /// Score all cross-camera pairs, no temporal gate.
    pub prune_disabled: bool,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            heading_tolerance: 45.0,
            walking_speed: 1.3,
            min_relative_speed: 0.1,
            arrival_slack: 1.0,
            region_weights: RegionWeights::default(),
            prune_disabled: false,
        }
    }
}

impl AssociationConfig {
    // Negated comparisons reject NaN along with out-of-range values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), AssociationError> {
        if !(self.heading_tolerance > 0.0 && self.heading_tolerance < 180.0) {
            return Err(AssociationError::InvalidConfig(format!(
                "heading_tolerance {} outside (0, 180)",
                self.heading_tolerance
            )));
        }
        if !(self.walking_speed > 0.0) {
            return Err(AssociationError::InvalidConfig("walking_speed must be > 0".into()));
        }
        if !(self.min_relative_speed > 0.0) {
            return Err(AssociationError::InvalidConfig("min_relative_speed must be > 0".into()));
        }
        if !(self.arrival_slack >= 0.0) {
            return Err(AssociationError::InvalidConfig("arrival_slack must be >= 0".into()));
        }
        let w = &self.region_weights;
        let weights = [w.gf, w.fb, w.ub, w.lb];
        if weights.iter().any(|v| !(*v >= 0.0)) {
            return Err(AssociationError::InvalidConfig("region weights must be >= 0".into()));
        }
        if weights.iter().all(|v| *v == 0.0) {
            return Err(AssociationError::InvalidConfig("region weights must not all be zero".into()));
        }
        Ok(())
    }
}

/// Result of the heading gate over the camera network.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateCameras {
    pub ids: BTreeSet<String>,
    /// Cameras whose logs do not cover the exit time.
    pub skipped_uncovered: Vec<String>,
}

/// Cameras lying along the target's heading at its exit time.
///
/// A camera qualifies when the bearing from the target's position to the
/// camera's GPS matches the target heading within the configured tolerance.
/// The target's own camera is never a candidate.
pub fn candidate_cameras(
    kinematics: &TargetKinematics,
    current_camera: &str,
    cameras: &[CameraTrajectory],
    t_exit: i64,
    cfg: &AssociationConfig,
) -> CandidateCameras {
    let mut out = CandidateCameras::default();
    for cam in cameras {
        if cam.camera_id() == current_camera {
            continue;
        }
        if !cam.covers(t_exit) {
            out.skipped_uncovered.push(cam.camera_id().to_string());
            continue;
        }
        let state = cam.sample_state(t_exit).expect("span checked above");
        match bearing(kinematics.position, state.position) {
            Ok(direction) => {
                if headings_equivalent(direction, kinematics.heading, cfg.heading_tolerance) {
                    out.ids.insert(cam.camera_id().to_string());
                }
            }
            // a camera sitting exactly on the target is trivially reachable
            Err(_) => {
                out.ids.insert(cam.camera_id().to_string());
            }
        }
    }
    out
}

/// The closest candidate camera at exit time, if any. Distance ties break
/// toward the lexicographically smallest camera id.
pub fn predict_next_camera(
    kinematics: &TargetKinematics,
    current_camera: &str,
    cameras: &[CameraTrajectory],
    t_exit: i64,
    cfg: &AssociationConfig,
) -> Option<String> {
    let candidates = candidate_cameras(kinematics, current_camera, cameras, t_exit, cfg);
    let by_id: BTreeMap<&str, &CameraTrajectory> =
        cameras.iter().map(|c| (c.camera_id(), c)).collect();
    let mut best: Option<(f64, &str)> = None;
    for id in &candidates.ids {
        let cam = by_id[id.as_str()];
        let state = cam.sample_state(t_exit).expect("candidates cover t_exit");
        let d = great_circle_distance(kinematics.position, state.position);
        // BTreeSet iterates ids in order, so strict less keeps the smaller id on ties
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, id));
        }
    }
    best.map(|(_, id)| id.to_string())
}

/// Travel time (seconds) from the target's exit position to camera `cam_j`.
///
/// Distance over relative speed: when target and camera share a heading the
/// denominator is the absolute speed difference, otherwise the speed sum.
/// The denominator is floored at `cfg.min_relative_speed` so near-equal
/// speeds give a large but finite estimate.
pub fn estimate_time_of_arrival(
    kinematics: &TargetKinematics,
    cam_j: &CameraTrajectory,
    t_exit: i64,
    cfg: &AssociationConfig,
) -> Result<f64, AssociationError> {
    let state = cam_j.sample_state(t_exit)?;
    let d = great_circle_distance(kinematics.position, state.position);
    let same_heading = headings_equivalent(kinematics.heading, state.heading, cfg.heading_tolerance);
    let denominator = if same_heading {
        (kinematics.speed_mps - state.speed_mps).abs()
    } else {
        kinematics.speed_mps + state.speed_mps
    };
    Ok(d / denominator.max(cfg.min_relative_speed))
}

/// Cosine similarity over the weight-scaled concatenation of the regions
/// present in both inputs, each region L2-normalized first.
pub fn appearance_similarity(
    a: &RegionFeatures,
    b: &RegionFeatures,
    cfg: &AssociationConfig,
) -> Result<f64, AssociationError> {
    similarity_with_norms(a, b, &region_norms(a), &region_norms(b), cfg)
}

/// Per-region L2 norms, cached by `masked_affinity` so pair scoring is a
/// single pass over the vectors.
fn region_norms(f: &RegionFeatures) -> [f64; 4] {
    let mut norms = [0.0; 4];
    for (n, r) in norms.iter_mut().zip(f.regions()) {
        if let Some(v) = r {
            *n = l2_norm(v);
        }
    }
    norms
}

fn similarity_with_norms(
    a: &RegionFeatures,
    b: &RegionFeatures,
    norms_a: &[f64; 4],
    norms_b: &[f64; 4],
    cfg: &AssociationConfig,
) -> Result<f64, AssociationError> {
    let w = &cfg.region_weights;
    let weights = [w.gf, w.fb, w.ub, w.lb];
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    let mut common = 0usize;
    for (r, weight) in weights.into_iter().enumerate() {
        let (Some(va), Some(vb)) = (a.regions()[r], b.regions()[r]) else { continue };
        if va.len() != vb.len() {
            return Err(AssociationError::DimensionMismatch { a: va.len(), b: vb.len() });
        }
        common += 1;
        if weight == 0.0 {
            continue;
        }
        let na = norms_a[r];
        let nb = norms_b[r];
        let w2 = weight * weight;
        if na > 0.0 {
            norm_a += w2;
        }
        if nb > 0.0 {
            norm_b += w2;
        }
        if na > 0.0 && nb > 0.0 {
            dot += w2 * dot_f32(va, vb) / (na * nb);
        }
    }
    if common == 0 {
        return Err(AssociationError::NoCommonRegions);
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (norm_a.sqrt() * norm_b.sqrt())).clamp(-1.0, 1.0))
}

fn l2_norm(v: &[f32]) -> f64 {
    dot_f32(v, v).sqrt()
}

/// Dot product with eight independent accumulators so the f64 additions do
/// not form one long dependency chain.
fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    const LANES: usize = 8;
    let mut lanes = [0.0f64; LANES];
    let n = a.len() - a.len() % LANES;
    for (ca, cb) in a[..n].chunks_exact(LANES).zip(b[..n].chunks_exact(LANES)) {
        for k in 0..LANES {
            lanes[k] += ca[k] as f64 * cb[k] as f64;
        }
    }
    let mut d: f64 = lanes.iter().sum();
    for (x, y) in a[n..].iter().zip(&b[n..]) {
        d += *x as f64 * *y as f64;
    }
    d
}

/// Per-query record of what the gate did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDiagnostics {
    pub query_id: String,
    pub predicted_camera: Option<String>,
    pub eta_seconds: Option<f64>,
    /// Cross-camera pairs zeroed by the gate.
    pub masked_count: usize,
    /// True when an empty candidate set forced unpruned scoring.
    pub fallback_unpruned: bool,
    /// Cameras skipped because their log did not cover the exit time.
    pub skipped_cameras: Vec<String>,
    /// Error that zeroed this row, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

/// Query-by-gallery score matrix with masked entries at exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityMatrix {
    pub query_ids: Vec<String>,
    pub gallery_ids: Vec<String>,
    /// Row-major, one row per query.
    pub rows: Vec<Vec<f64>>,
    pub per_query: Vec<QueryDiagnostics>,
}

impl AffinityMatrix {
    pub fn score(&self, query: usize, gallery: usize) -> f64 {
        self.rows[query][gallery]
    }

    pub fn query_index(&self, query_id: &str) -> Option<usize> {
        self.query_ids.iter().position(|q| q == query_id)
    }
}

/// Scores every query against the gallery with temporal masking.
///
/// Same-camera pairs always score zero. A per-query failure (for instance a
/// camera log not covering the exit time) zeroes that row and is recorded in
/// the diagnostics instead of aborting the batch. Rows are computed in
/// parallel; the output is independent of scheduling.
pub fn masked_affinity(
    queries: &[Tracklet],
    gallery: &[Tracklet],
    cameras: &[CameraTrajectory],
    cfg: &AssociationConfig,
) -> Result<AffinityMatrix, AssociationError> {
    cfg.validate()?;
    let mut plans: Vec<RowPlan> = queries.par_iter().map(|q| plan_query(q, cameras, cfg)).collect();

    // Scoring walks the gallery in cache-sized tiles per block of query
    // rows. Each score is a pure function of its pair, and each row still
    // sees the gallery in ascending order, so the output is identical to a
    // plain row-by-row sweep.
    let mut rows: Vec<Vec<f64>> = queries.iter().map(|_| vec![0.0; gallery.len()]).collect();
    rows.par_chunks_mut(QUERY_BLOCK)
        .zip(plans.par_chunks_mut(QUERY_BLOCK))
        .zip(queries.par_chunks(QUERY_BLOCK))
        .for_each(|((row_block, plan_block), query_block)| {
            for tile_start in (0..gallery.len()).step_by(GALLERY_TILE) {
                let tile = tile_start..(tile_start + GALLERY_TILE).min(gallery.len());
                // computing the norms here doubles as the tile's first
                // touch, so the dot products below hit a warm cache
                let tile_norms: Vec<[f64; 4]> =
                    gallery[tile.clone()].iter().map(|g| region_norms(&g.features)).collect();
                for ((row, plan), q) in
                    row_block.iter_mut().zip(plan_block.iter_mut()).zip(query_block)
                {
                    if plan.diag.failed.is_some() {
                        continue;
                    }
                    for gi in tile.clone() {
                        let g = &gallery[gi];
                        if g.camera_id == q.camera_id {
                            continue;
                        }
                        let passes = match &plan.gate {
                            None => true,
                            Some((next_camera, earliest_entry_ms)) => {
                                g.camera_id == *next_camera
                                    && g.entry_ms() as f64 >= *earliest_entry_ms
                            }
                        };
                        if passes {
                            match similarity_with_norms(
                                &q.features,
                                &g.features,
                                &plan.norms,
                                &tile_norms[gi - tile_start],
                                cfg,
                            ) {
                                Ok(score) => row[gi] = score,
                                Err(e) => {
                                    plan.diag.failed = Some(e.to_string());
                                    break;
                                }
                            }
                        } else {
                            plan.diag.masked_count += 1;
                        }
                    }
                }
            }
            for (row, plan) in row_block.iter_mut().zip(plan_block.iter()) {
                if plan.diag.failed.is_some() {
                    row.fill(0.0);
                }
            }
        });

    Ok(AffinityMatrix {
        query_ids: queries.iter().map(|q| q.track_id.clone()).collect(),
        gallery_ids: gallery.iter().map(|g| g.track_id.clone()).collect(),
        rows,
        per_query: plans.into_iter().map(|p| p.diag).collect(),
    })
}

/// Rows scored together so their gallery traffic is shared.
const QUERY_BLOCK: usize = 64;
/// Gallery tracklets per tile, sized to keep a tile of 2048-dimensional
/// four-region features resident in a small L2 cache.
const GALLERY_TILE: usize = 32;

struct RowPlan {
    /// Predicted camera and earliest admissible gallery entry time; `None`
    /// scores every cross-camera pair.
    gate: Option<(String, f64)>,
    norms: [f64; 4],
    diag: QueryDiagnostics,
}

fn plan_query(q: &Tracklet, cameras: &[CameraTrajectory], cfg: &AssociationConfig) -> RowPlan {
    let mut plan = RowPlan {
        gate: None,
        norms: region_norms(&q.features),
        diag: QueryDiagnostics {
            query_id: q.track_id.clone(),
            predicted_camera: None,
            eta_seconds: None,
            masked_count: 0,
            fallback_unpruned: false,
            skipped_cameras: Vec::new(),
            failed: None,
        },
    };
    if cfg.prune_disabled {
        return plan;
    }
    if let Err(e) = plan_gate(q, cameras, cfg, &mut plan) {
        plan.diag.failed = Some(e.to_string());
    }
    plan
}

fn plan_gate(
    q: &Tracklet,
    cameras: &[CameraTrajectory],
    cfg: &AssociationConfig,
    plan: &mut RowPlan,
) -> Result<(), AssociationError> {
    let cam = cameras
        .iter()
        .find(|c| c.camera_id() == q.camera_id)
        .ok_or_else(|| AssociationError::UnknownCamera(q.camera_id.clone()))?;
    let kinematics = infer_target_kinematics(q, cam, Some(cfg.walking_speed))?;
    let t_exit = q.exit_ms();
    let candidates = candidate_cameras(&kinematics, &q.camera_id, cameras, t_exit, cfg);
    plan.diag.skipped_cameras = candidates.skipped_uncovered;
    if candidates.ids.is_empty() {
        // an empty candidate set would zero recall; fall back to an
        // unpruned cross-camera search and flag it
        plan.diag.fallback_unpruned = true;
        return Ok(());
    }
    let next = predict_next_camera(&kinematics, &q.camera_id, cameras, t_exit, cfg)
        .expect("candidate set is non-empty");
    let cam_j = cameras.iter().find(|c| c.camera_id() == next).expect("known id");
    let eta = estimate_time_of_arrival(&kinematics, cam_j, t_exit, cfg)?;
    plan.diag.predicted_camera = Some(next.clone());
    plan.diag.eta_seconds = Some(eta);
    let earliest_entry_ms = t_exit as f64 + cfg.arrival_slack * eta * 1000.0;
    plan.gate = Some((next, earliest_entry_ms));
    Ok(())
}

/// Gallery ids for one query in decreasing score order. Masked (exactly
/// zero) entries rank last; ties break toward the smaller gallery id.
pub fn rank_gallery(m: &AffinityMatrix, query_id: &str) -> Result<Vec<String>, AssociationError> {
    let row_idx = m
        .query_index(query_id)
        .ok_or_else(|| AssociationError::UnknownQuery(query_id.to_string()))?;
    let row = &m.rows[row_idx];
    let mut order: Vec<usize> = (0..m.gallery_ids.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (row[a], row[b]);
        (sa == 0.0)
            .cmp(&(sb == 0.0))
            .then(sb.partial_cmp(&sa).expect("scores are finite"))
            .then_with(|| m.gallery_ids[a].cmp(&m.gallery_ids[b]))
    });
    Ok(order.into_iter().map(|i| m.gallery_ids[i].clone()).collect())
}
