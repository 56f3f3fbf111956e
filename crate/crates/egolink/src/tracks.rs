//! Tracklets: one target's contiguous detections in one camera, plus the
//! appearance features and inferred kinematics the association engine
//! consumes.
//!
//! Appearance features arrive precomputed, one vector per body region per
//! tracklet (global, full body, upper body, lower body). This module never
//! looks at pixels.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metadata::{CameraTrajectory, MetadataError};
use crate::{Bearing, GeoPoint};

/// Average pedestrian walking speed, m/s.
pub const WALKING_SPEED_MPS: f64 = 1.3;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("invalid tracklet '{id}': {message}")]
    Validation { id: String, message: String },
    #[error("tracklet '{0}' has too few detections to infer motion direction")]
    InsufficientData(String),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A single detection box at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub t_ms: i64,
    /// `[x, y, width, height]` in pixels.
    pub bbox: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occluded_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub is_false_positive: Option<bool>,
}

impl Detection {
    pub fn width(&self) -> f64 {
        self.bbox[2]
    }

    pub fn height(&self) -> f64 {
        self.bbox[3]
    }
}

/// Per-region appearance vectors. All present regions share one dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionFeatures {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gf: Option<Vec<f32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fb: Option<Vec<f32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ub: Option<Vec<f32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lb: Option<Vec<f32>>,
}

/// Region order used wherever the four regions are iterated.
pub const REGION_NAMES: [&str; 4] = ["gf", "fb", "ub", "lb"];

impl RegionFeatures {
    pub fn regions(&self) -> [Option<&Vec<f32>>; 4] {
        [self.gf.as_ref(), self.fb.as_ref(), self.ub.as_ref(), self.lb.as_ref()]
    }

    /// Shared dimension of the present regions, if consistent.
    pub fn dimension(&self) -> Option<usize> {
        let mut dim = None;
        for region in self.regions().into_iter().flatten() {
            match dim {
                None => dim = Some(region.len()),
                Some(d) if d != region.len() => return None,
                _ => {}
            }
        }
        dim
    }

    fn validate(&self, id: &str) -> Result<(), TrackError> {
        if self.regions().iter().all(|r| r.is_none()) {
            return Err(TrackError::Validation {
                id: id.to_string(),
                message: "no feature region present".into(),
            });
        }
        match self.dimension() {
            Some(0) => Err(TrackError::Validation {
                id: id.to_string(),
                message: "zero-dimensional feature vectors".into(),
            }),
            None => Err(TrackError::Validation {
                id: id.to_string(),
                message: "feature regions have mismatched dimensions".into(),
            }),
            Some(_) => Ok(()),
        }
    }
}

/// Which way the target moves relative to its camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionDirection {
    TowardCamera,
    AwayFromCamera,
}

/// Inferred world-frame motion state of a target at its exit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetKinematics {
    pub heading: Bearing,
    pub position: GeoPoint,
    pub speed_mps: f64,
    pub direction: MotionDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub track_id: String,
    pub camera_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub person_id: Option<String>,
    pub detections: Vec<Detection>,
    pub features: RegionFeatures,
}

impl Tracklet {
    /// Checks the structural invariants; call after construction or parse.
    pub fn validate(&self) -> Result<(), TrackError> {
        let fail = |message: String| TrackError::Validation {
            id: self.track_id.clone(),
            message,
        };
        if self.detections.is_empty() {
            return Err(fail("no detections".into()));
        }
        for d in &self.detections {
            if !(d.width() > 0.0 && d.height() > 0.0) {
                return Err(fail(format!("non-positive bbox at {} ms", d.t_ms)));
            }
            if let Some(f) = d.occluded_fraction {
                if !(0.0..=1.0).contains(&f) {
                    return Err(fail(format!("occluded_fraction {f} outside [0,1]")));
                }
            }
        }
        for pair in self.detections.windows(2) {
            if pair[1].t_ms < pair[0].t_ms {
                return Err(fail(format!("detections out of order at {} ms", pair[1].t_ms)));
            }
        }
        self.features.validate(&self.track_id)
    }

    pub fn entry_ms(&self) -> i64 {
        self.detections[0].t_ms
    }

    pub fn exit_ms(&self) -> i64 {
        self.detections[self.detections.len() - 1].t_ms
    }
}

/// Direction of motion from the least-squares slope of bbox height over time.
///
/// In first-person video an approaching target grows in apparent size, so a
/// positive slope means the target closes on the camera. A zero slope falls
/// back to `AwayFromCamera`, which keeps the target on the camera's own
/// heading.
pub fn infer_motion_direction(t: &Tracklet) -> Result<MotionDirection, TrackError> {
    if t.detections.len() < 2 {
        return Err(TrackError::InsufficientData(t.track_id.clone()));
    }
    let n = t.detections.len() as f64;
    let t0 = t.entry_ms();
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut sum_xx = 0.0;
    let mut sum_xy = 0.0;
    for d in &t.detections {
        let x = (d.t_ms - t0) as f64 / 1000.0;
        let y = d.height();
        sum_x += x;
        sum_y += y;
        sum_xx += x * x;
        sum_xy += x * y;
    }
    let numerator = n * sum_xy - sum_x * sum_y;
    // degenerate spread (all detections at one instant) has zero slope too
    let denominator = n * sum_xx - sum_x * sum_x;
    let slope = if denominator > 0.0 { numerator / denominator } else { 0.0 };
    Ok(if slope > 0.0 { MotionDirection::TowardCamera } else { MotionDirection::AwayFromCamera })
}

/// Estimates the target's world-frame kinematics at exit time from its
/// camera's sensor state.
///
/// A target walking away from the camera shares the camera's heading; one
/// walking toward it gets the opposite heading. Its position is approximated
/// by the camera's GPS at exit, its speed by `walking_speed`
/// (default 1.3 m/s).
pub fn infer_target_kinematics(
    t: &Tracklet,
    cam: &CameraTrajectory,
    walking_speed: Option<f64>,
) -> Result<TargetKinematics, TrackError> {
    let direction = infer_motion_direction(t)?;
    let state = cam.sample_state(t.exit_ms())?;
    let heading = match direction {
        MotionDirection::AwayFromCamera => state.heading,
        MotionDirection::TowardCamera => state.heading.opposite(),
    };
    Ok(TargetKinematics {
        heading,
        position: state.position,
        speed_mps: walking_speed.unwrap_or(WALKING_SPEED_MPS),
        direction,
    })
}

/// Reads a tracklet corpus from JSON Lines, validating each record.
pub fn read_tracklets(input: impl Read) -> Result<Vec<Tracklet>, TrackError> {
    let mut out = Vec::new();
    for (i, line_result) in BufReader::new(input).lines().enumerate() {
        let line = i + 1;
        let text = line_result?;
        if text.trim().is_empty() {
            continue;
        }
        let tracklet: Tracklet = serde_json::from_str(&text)
            .map_err(|e| TrackError::Parse { line, message: e.to_string() })?;
        tracklet.validate()?;
        out.push(tracklet);
    }
    Ok(out)
}

/// Writes a tracklet corpus as JSON Lines, one object per tracklet.
pub fn write_tracklets(tracklets: &[Tracklet], mut out: impl Write) -> Result<(), TrackError> {
    for t in tracklets {
        serde_json::to_writer(&mut out, t)
            .map_err(|e| TrackError::Parse { line: 0, message: e.to_string() })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::metadata::CameraStateSample;

    pub(crate) fn det(t_ms: i64, height: f64) -> Detection {
        Detection { t_ms, bbox: [0.0, 0.0, 50.0, height], occluded_fraction: None, is_false_positive: None }
    }

    pub(crate) fn tracklet_with_heights(heights: &[f64]) -> Tracklet {
        Tracklet {
            track_id: "t0".into(),
            camera_id: "cam0".into(),
            person_id: None,
            detections: heights.iter().enumerate().map(|(i, &h)| det(i as i64 * 100, h)).collect(),
            features: RegionFeatures { gf: Some(vec![1.0, 0.0]), ..Default::default() },
        }
    }

    fn camera(heading: f64) -> CameraTrajectory {
        let mk = |t, lat| CameraStateSample {
            timestamp_ms: t,
            position: GeoPoint::new(0.0, lat).unwrap(),
            heading: Bearing::new(heading),
            speed_mps: 1.0,
        };
        CameraTrajectory::new("cam0", vec![mk(0, 0.0), mk(10_000, 0.0001)], BTreeMap::new()).unwrap()
    }

    #[test]
    fn growing_heights_mean_toward() {
        let t = tracklet_with_heights(&[100.0, 120.0, 140.0]);
        assert_eq!(infer_motion_direction(&t).unwrap(), MotionDirection::TowardCamera);
    }

    #[test]
    fn shrinking_heights_mean_away() {
        let t = tracklet_with_heights(&[140.0, 120.0, 100.0]);
        assert_eq!(infer_motion_direction(&t).unwrap(), MotionDirection::AwayFromCamera);
    }

    #[test]
    fn flat_heights_tie_break_away() {
        let t = tracklet_with_heights(&[100.0, 100.0, 100.0]);
        assert_eq!(infer_motion_direction(&t).unwrap(), MotionDirection::AwayFromCamera);
    }

    #[test]
    fn single_detection_is_insufficient() {
        let t = tracklet_with_heights(&[100.0]);
        assert!(matches!(infer_motion_direction(&t), Err(TrackError::InsufficientData(_))));
    }

    #[test]
    fn reversing_detections_flips_direction() {
        let t = tracklet_with_heights(&[90.0, 100.0, 125.0]);
        let mut rev = t.clone();
        rev.detections.reverse();
        for (i, d) in rev.detections.iter_mut().enumerate() {
            d.t_ms = i as i64 * 100;
        }
        assert_ne!(infer_motion_direction(&t).unwrap(), infer_motion_direction(&rev).unwrap());
    }

    #[test]
    fn kinematics_away_keeps_camera_heading() {
        let t = tracklet_with_heights(&[140.0, 120.0, 100.0]);
        let k = infer_target_kinematics(&t, &camera(90.0), None).unwrap();
        assert_eq!(k.heading.degrees(), 90.0);
        assert_eq!(k.speed_mps, WALKING_SPEED_MPS);
    }

    #[test]
    fn kinematics_toward_takes_opposite_heading() {
        let t = tracklet_with_heights(&[100.0, 120.0, 140.0]);
        let k = infer_target_kinematics(&t, &camera(90.0), None).unwrap();
        assert_eq!(k.heading.degrees(), 270.0);
    }

    #[test]
    fn kinematics_out_of_camera_span() {
        let mut t = tracklet_with_heights(&[100.0, 120.0]);
        t.detections[1].t_ms = 20_000;
        assert!(matches!(
            infer_target_kinematics(&t, &camera(0.0), None),
            Err(TrackError::Metadata(MetadataError::OutOfRange { .. }))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = tracklet_with_heights(&[100.0, 110.0]);
        t.person_id = Some("p1".into());
        t.detections[0].occluded_fraction = Some(0.25);
        t.detections[1].is_false_positive = Some(true);
        let mut buf = Vec::new();
        write_tracklets(&[t.clone()], &mut buf).unwrap();
        let back = read_tracklets(buf.as_slice()).unwrap();
        assert_eq!(back, vec![t]);
    }

    #[test]
    fn read_rejects_mismatched_regions() {
        let json = r#"{"track_id":"t","camera_id":"c","detections":[{"t_ms":0,"bbox":[0,0,1,1]}],"features":{"gf":[1,0],"fb":[1]}}"#;
        assert!(matches!(
            read_tracklets(json.as_bytes()),
            Err(TrackError::Validation { .. })
        ));
    }
}
