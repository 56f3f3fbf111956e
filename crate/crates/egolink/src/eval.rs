//! Retrieval metrics over ranked galleries: CMC curve and mean average
//! precision, plus the cross-camera evaluation driver.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{masked_affinity, rank_gallery, AssociationConfig, AssociationError};
use crate::metadata::CameraTrajectory;
use crate::scalar::Float;
use crate::tracks::Tracklet;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query '{0}' has no relevant gallery items")]
    NoRelevant(String),
    #[error("no valid queries in the corpus")]
    EmptyQuerySet,
    #[error(transparent)]
    Association(#[from] AssociationError),
}

/// Plain (non-interpolated) average precision.
///
/// The sum over relevant hit positions `r` of `hits_so_far / r`, divided by
/// the number of relevant items.
pub fn average_precision<T: Float>(
    ranking: &[String],
    relevant: &BTreeSet<String>,
) -> Result<T, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::NoRelevant("<unnamed>".into()));
    }
    let mut hits = 0usize;
    let mut sum = T::zero();
    for (i, id) in ranking.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += T::from_usize(hits) / T::from_usize(i + 1);
        }
    }
    Ok(sum / T::from_usize(relevant.len()))
}

/// 1-based rank of the first relevant item, if any appears in the ranking.
pub fn first_hit_rank(ranking: &[String], relevant: &BTreeSet<String>) -> Option<usize> {
    ranking.iter().position(|id| relevant.contains(id)).map(|i| i + 1)
}

/// CMC curve: `cmc[k-1]` is the fraction of queries whose first relevant
/// item appears at rank `<= k`, for `k = 1..=max_rank`.
pub fn cmc_curve<T: Float>(
    rankings: &[(Vec<String>, BTreeSet<String>)],
    max_rank: usize,
) -> Result<Vec<T>, EvalError> {
    let mut counts = vec![0usize; max_rank];
    for (ranking, relevant) in rankings {
        if relevant.is_empty() {
            return Err(EvalError::NoRelevant("<unnamed>".into()));
        }
        if let Some(rank) = first_hit_rank(ranking, relevant) {
            if rank <= max_rank {
                counts[rank - 1] += 1;
            }
        }
    }
    let total = T::from_usize(rankings.len());
    let mut cumulative = 0usize;
    Ok(counts
        .into_iter()
        .map(|c| {
            cumulative += c;
            T::from_usize(cumulative) / total
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Length of the reported CMC curve.
    pub max_rank: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { max_rank: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQueryMetrics {
    pub query_id: String,
    pub ap: f64,
    /// 1-based rank of the first correct match, if it surfaced at all.
    pub first_hit_rank: Option<usize>,
    pub masked_pairs: usize,
    pub fallback_unpruned: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruningStats {
    pub total_masked_pairs: usize,
    pub fallback_queries: usize,
    pub failed_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cmc: Vec<f64>,
    pub map: f64,
    pub per_query: Vec<PerQueryMetrics>,
    pub num_valid_queries: usize,
    /// Labeled tracklets with no cross-camera ground-truth match.
    pub num_excluded_queries: usize,
    pub pruning: PruningStats,
}

/// Runs the cross-camera protocol over a labeled corpus.
///
/// Every labeled tracklet with at least one same-identity tracklet in a
/// different camera becomes a query; the rest of the corpus is its gallery,
/// with same-camera items excluded from the ranking. Tracklets without a
/// cross-camera match are excluded and counted.
pub fn evaluate(
    tracklets: &[Tracklet],
    cameras: &[CameraTrajectory],
    cfg: &AssociationConfig,
    options: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let queries: Vec<&Tracklet> = tracklets
        .iter()
        .filter(|t| t.person_id.is_some())
        .filter(|t| {
            tracklets.iter().any(|g| {
                g.track_id != t.track_id
                    && g.camera_id != t.camera_id
                    && g.person_id == t.person_id
            })
        })
        .collect();
    let num_excluded_queries =
        tracklets.iter().filter(|t| t.person_id.is_some()).count() - queries.len();
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }

    let owned_queries: Vec<Tracklet> = queries.iter().map(|q| (*q).clone()).collect();
    let matrix = masked_affinity(&owned_queries, tracklets, cameras, cfg)?;

    let per_query: Vec<PerQueryMetrics> = queries
        .par_iter()
        .zip(&matrix.per_query)
        .map(|(q, diag)| {
            let relevant: BTreeSet<String> = tracklets
                .iter()
                .filter(|g| g.camera_id != q.camera_id && g.person_id == q.person_id)
                .map(|g| g.track_id.clone())
                .collect();
            let full = rank_gallery(&matrix, &q.track_id).expect("query is in the matrix");
            // cross-camera protocol: same-camera items (and the query
            // itself) never occupy a rank
            let same_camera: BTreeSet<&str> = tracklets
                .iter()
                .filter(|g| g.camera_id == q.camera_id)
                .map(|g| g.track_id.as_str())
                .collect();
            let ranking: Vec<String> =
                full.into_iter().filter(|id| !same_camera.contains(id.as_str())).collect();
            let ap = average_precision::<f64>(&ranking, &relevant).expect("relevant is non-empty");
            PerQueryMetrics {
                query_id: q.track_id.clone(),
                ap,
                first_hit_rank: first_hit_rank(&ranking, &relevant),
                masked_pairs: diag.masked_count,
                fallback_unpruned: diag.fallback_unpruned,
            }
        })
        .collect();

    let total = per_query.len();
    let map = per_query.iter().map(|p| p.ap).sum::<f64>() / total as f64;
    let mut counts = vec![0usize; options.max_rank];
    for p in &per_query {
        if let Some(rank) = p.first_hit_rank {
            if rank <= options.max_rank {
                counts[rank - 1] += 1;
            }
        }
    }
    let mut cumulative = 0usize;
    let cmc = counts
        .into_iter()
        .map(|c| {
            cumulative += c;
            cumulative as f64 / total as f64
        })
        .collect();

    let pruning = PruningStats {
        total_masked_pairs: matrix.per_query.iter().map(|d| d.masked_count).sum(),
        fallback_queries: matrix.per_query.iter().filter(|d| d.fallback_unpruned).count(),
        failed_queries: matrix.per_query.iter().filter(|d| d.failed.is_some()).count(),
    };

    Ok(EvalReport {
        cmc,
        map,
        per_query,
        num_valid_queries: total,
        num_excluded_queries,
        pruning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn set(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ap_hit_at_rank_one() {
        let ap: f64 = average_precision(&ids(&["gp", "gn1", "gn2"]), &set(&["gp"])).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn ap_single_hit_at_rank_two() {
        let ap: f64 = average_precision(&ids(&["gn1", "gp", "gn2"]), &set(&["gp"])).unwrap();
        assert_eq!(ap, 0.5);
    }

    #[test]
    fn ap_two_hits() {
        // hits at ranks 1 and 3: (1/2) * (1/1 + 2/3) = 5/6
        let ap: f64 =
            average_precision(&ids(&["gp1", "gn", "gp2"]), &set(&["gp1", "gp2"])).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn ap_missing_relevant_contributes_zero_terms() {
        let ap: f64 = average_precision(&ids(&["gn1", "gn2"]), &set(&["gp"])).unwrap();
        assert_eq!(ap, 0.0);
    }

    #[test]
    fn ap_empty_relevant_is_error() {
        assert!(matches!(
            average_precision::<f64>(&ids(&["g"]), &BTreeSet::new()),
            Err(EvalError::NoRelevant(_))
        ));
    }

    #[test]
    fn cmc_all_rank_one() {
        let rankings = vec![
            (ids(&["gp", "gn"]), set(&["gp"])),
            (ids(&["gq", "gx"]), set(&["gq"])),
        ];
        let cmc: Vec<f64> = cmc_curve(&rankings, 2).unwrap();
        assert_eq!(cmc, vec![1.0, 1.0]);
    }

    #[test]
    fn cmc_mixed_ranks() {
        let rankings = vec![
            (ids(&["gp", "ga", "gb"]), set(&["gp"])),
            (ids(&["ga", "gb", "gp"]), set(&["gp"])),
        ];
        let cmc: Vec<f64> = cmc_curve(&rankings, 3).unwrap();
        assert_eq!(cmc, vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn cmc_no_hits() {
        let rankings = vec![(ids(&["ga", "gb"]), set(&["gp"]))];
        let cmc: Vec<f64> = cmc_curve(&rankings, 2).unwrap();
        assert_eq!(cmc, vec![0.0, 0.0]);
    }

    #[test]
    fn cmc_generic_over_f32() {
        let rankings = vec![(ids(&["gp"]), set(&["gp"]))];
        let cmc: Vec<f32> = cmc_curve(&rankings, 1).unwrap();
        assert_eq!(cmc, vec![1.0f32]);
    }
}
