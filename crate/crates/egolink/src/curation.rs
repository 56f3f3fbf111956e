//! Corpus curation: length, false-positive and occlusion filters applied to
//! a tracklet set before association or evaluation.
//!
//! The occlusion rule drops individual detections first, then the
//! false-positive and length rules judge whole tracklets on the cleaned
//! detection set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracks::Tracklet;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("invalid curation rules: {0}")]
    InvalidRules(String),
    #[error("tracklet '{track_id}' lacks required annotation '{field}'")]
    MissingAnnotation { track_id: String, field: &'static str },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationRules {
    /// Tracklets with fewer surviving detections are dropped.
    pub min_frames: usize,
    /// Tracklets with a higher fraction of false-positive detections are dropped.
    pub max_false_positive_fraction: f64,
    /// Detections occluded beyond this fraction are dropped.
    pub max_detection_occlusion: f64,
    /// In strict mode, missing annotations are an error instead of a skip.
    pub strict: bool,
}

impl Default for CurationRules {
    fn default() -> Self {
        Self {
            min_frames: 16,
            max_false_positive_fraction: 0.20,
            max_detection_occlusion: 0.80,
            strict: false,
        }
    }
}

impl CurationRules {
    pub fn validate(&self) -> Result<(), CurationError> {
        if self.min_frames < 1 {
            return Err(CurationError::InvalidRules("min_frames must be >= 1".into()));
        }
        for (name, v) in [
            ("max_false_positive_fraction", self.max_false_positive_fraction),
            ("max_detection_occlusion", self.max_detection_occlusion),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CurationError::InvalidRules(format!("{name} {v} outside [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input_tracklets: usize,
    pub output_tracklets: usize,
    /// Detections dropped by the occlusion rule.
    pub detections_removed_occluded: usize,
    /// Tracklets dropped by the false-positive-fraction rule.
    pub removed_false_positive: usize,
    /// Tracklets dropped by the minimum-length rule.
    pub removed_short: usize,
    /// Detections the occlusion rule skipped for lack of annotation.
    pub skipped_unannotated_occlusion: usize,
    /// Tracklets the false-positive rule skipped for lack of annotation.
    pub skipped_unannotated_false_positive: usize,
}

impl CurationReport {
    /// Merges reports from independently curated partitions.
    pub fn merge(&mut self, other: &CurationReport) {
        self.input_tracklets += other.input_tracklets;
        self.output_tracklets += other.output_tracklets;
        self.detections_removed_occluded += other.detections_removed_occluded;
        self.removed_false_positive += other.removed_false_positive;
        self.removed_short += other.removed_short;
        self.skipped_unannotated_occlusion += other.skipped_unannotated_occlusion;
        self.skipped_unannotated_false_positive += other.skipped_unannotated_false_positive;
    }
}

/// Applies the three curation rules, in order: per-detection occlusion,
/// tracklet false-positive fraction, tracklet minimum length.
pub fn curate(
    tracklets: Vec<Tracklet>,
    rules: &CurationRules,
) -> Result<(Vec<Tracklet>, CurationReport), CurationError> {
    rules.validate()?;
    let mut report = CurationReport {
        input_tracklets: tracklets.len(),
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(tracklets.len());

    for mut t in tracklets {
        // rule 3 in the dataset's numbering, applied first so the later
        // rules see the cleaned detection set
        let mut cleaned = Vec::with_capacity(t.detections.len());
        for d in t.detections {
            match d.occluded_fraction {
                Some(f) if f > rules.max_detection_occlusion => {
                    report.detections_removed_occluded += 1;
                }
                Some(_) => cleaned.push(d),
                None if rules.strict => {
                    return Err(CurationError::MissingAnnotation {
                        track_id: t.track_id,
                        field: "occluded_fraction",
                    });
                }
                None => {
                    report.skipped_unannotated_occlusion += 1;
                    cleaned.push(d);
                }
            }
        }
        t.detections = cleaned;

        if t.detections.is_empty() {
            report.removed_short += 1;
            continue;
        }

        let annotated = t.detections.iter().all(|d| d.is_false_positive.is_some());
        if annotated {
            let false_positives =
                t.detections.iter().filter(|d| d.is_false_positive == Some(true)).count();
            let fraction = false_positives as f64 / t.detections.len() as f64;
            if fraction > rules.max_false_positive_fraction {
                report.removed_false_positive += 1;
                continue;
            }
        } else if rules.strict {
            return Err(CurationError::MissingAnnotation {
                track_id: t.track_id,
                field: "is_false_positive",
            });
        } else {
            report.skipped_unannotated_false_positive += 1;
        }

        if t.detections.len() < rules.min_frames {
            report.removed_short += 1;
            continue;
        }

        kept.push(t);
    }

    report.output_tracklets = kept.len();
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracks::{Detection, RegionFeatures};

    fn det(t_ms: i64, occluded: Option<f64>, fp: Option<bool>) -> Detection {
        Detection {
            t_ms,
            bbox: [0.0, 0.0, 40.0, 100.0],
            occluded_fraction: occluded,
            is_false_positive: fp,
        }
    }

    fn tracklet(id: &str, detections: Vec<Detection>) -> Tracklet {
        Tracklet {
            track_id: id.into(),
            camera_id: "cam0".into(),
            person_id: Some("p".into()),
            detections,
            features: RegionFeatures { gf: Some(vec![1.0, 0.0]), ..Default::default() },
        }
    }

    fn clean_dets(n: usize) -> Vec<Detection> {
        (0..n).map(|i| det(i as i64 * 40, Some(0.0), Some(false))).collect()
    }

    #[test]
    fn short_tracklet_removed() {
        let (kept, report) = curate(vec![tracklet("a", clean_dets(15))], &CurationRules::default()).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report.removed_short, 1);
    }

    #[test]
    fn false_positive_fraction_removes_tracklet() {
        let mut dets = clean_dets(20);
        for d in dets.iter_mut().take(5) {
            d.is_false_positive = Some(true);
        }
        let (kept, report) = curate(vec![tracklet("a", dets)], &CurationRules::default()).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report.removed_false_positive, 1);
    }

    #[test]
    fn occluded_detections_pruned_but_tracklet_kept() {
        let mut dets = clean_dets(20);
        dets[3].occluded_fraction = Some(0.9);
        dets[7].occluded_fraction = Some(0.9);
        let (kept, report) = curate(vec![tracklet("a", dets)], &CurationRules::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].detections.len(), 18);
        assert_eq!(report.detections_removed_occluded, 2);
        // entry/exit times follow the surviving detections
        assert_eq!(kept[0].entry_ms(), 0);
    }

    #[test]
    fn exact_boundary_fractions_survive() {
        // exactly 20% false positives and exactly 0.8 occlusion stay in
        let mut dets = clean_dets(20);
        for d in dets.iter_mut().take(4) {
            d.is_false_positive = Some(true);
        }
        dets[5].occluded_fraction = Some(0.8);
        let (kept, _) = curate(vec![tracklet("a", dets)], &CurationRules::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].detections.len(), 20);
    }

    #[test]
    fn strict_mode_rejects_missing_annotations() {
        let dets = (0..20).map(|i| det(i * 40, None, Some(false))).collect();
        let rules = CurationRules { strict: true, ..Default::default() };
        assert!(matches!(
            curate(vec![tracklet("a", dets)], &rules),
            Err(CurationError::MissingAnnotation { field: "occluded_fraction", .. })
        ));
    }

    #[test]
    fn lenient_mode_counts_skips() {
        let dets = (0..20).map(|i| det(i * 40, None, None)).collect();
        let (kept, report) = curate(vec![tracklet("a", dets)], &CurationRules::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(report.skipped_unannotated_occlusion, 20);
        assert_eq!(report.skipped_unannotated_false_positive, 1);
    }

    #[test]
    fn curation_is_idempotent() {
        let mut corpus = vec![
            tracklet("a", clean_dets(30)),
            tracklet("b", clean_dets(10)),
        ];
        corpus[0].detections[4].occluded_fraction = Some(0.95);
        let rules = CurationRules::default();
        let (once, r1) = curate(corpus, &rules).unwrap();
        let (twice, r2) = curate(once.clone(), &rules).unwrap();
        assert_eq!(once, twice);
        assert_eq!(r2.detections_removed_occluded, 0);
        assert_eq!(r1.removed_short + r1.removed_false_positive, r1.input_tracklets - r1.output_tracklets);
    }

    #[test]
    fn invalid_rules_rejected() {
        let rules = CurationRules { min_frames: 0, ..Default::default() };
        assert!(matches!(curate(vec![], &rules), Err(CurationError::InvalidRules(_))));
        let rules = CurationRules { max_detection_occlusion: 1.5, ..Default::default() };
        assert!(matches!(curate(vec![], &rules), Err(CurationError::InvalidRules(_))));
    }
}
