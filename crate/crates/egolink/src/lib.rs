//! Cross-camera track re-identification for moving, non-overlapping
//! cameras.
//!
//! Appearance similarity between tracklets is fused with sensor-metadata
//! constraints: from each camera's GPS/heading/speed log the engine infers a
//! target's exit-time kinematics, predicts its next camera and time of
//! arrival, and prunes the gallery to tracks that are spatio-temporally
//! plausible. Results are scored with CMC and mAP, and a kinematic
//! simulator provides ground truth and synthetic corpora.
//!
//! The numeric core ([`geo`], the similarity and metric functions) is
//! generic over the scalar type via [`scalar::Float`]; the aliases at the
//! crate root fix `f64`, which is what the pipeline modules use.

pub mod association;
pub mod curation;
pub mod eval;
pub mod geo;
pub mod metadata;
pub mod scalar;
pub mod simulate;
pub mod tracks;

/// `f64` geographic point, the pipeline's working type.
pub type GeoPoint = geo::GeoPoint<f64>;
/// `f64` compass bearing, the pipeline's working type.
pub type Bearing = geo::Bearing<f64>;
