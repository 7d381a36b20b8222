//! Detection error rates. Decision scores are oriented so that higher means
//! more morph-like; a sample is classified as an attack iff `score >= threshold`.

use serde::{Deserialize, Serialize};

use crate::calibration::{candidate_thresholds, frac_below, order_statistic_threshold, sorted};
use crate::error::{Error, Result};

/// Fraction of attack samples classified as bona fide.
pub fn macer(attack_scores: &[f64], threshold: f64) -> Result<f64> {
    if attack_scores.is_empty() {
        return Err(Error::EmptyInput("attack scores"));
    }
    Ok(attack_scores.iter().filter(|&&s| s < threshold).count() as f64 / attack_scores.len() as f64)
}

/// Fraction of bona fide samples classified as attacks.
pub fn bpcer(bona_fide_scores: &[f64], threshold: f64) -> Result<f64> {
    if bona_fide_scores.is_empty() {
        return Err(Error::EmptyInput("bona fide scores"));
    }
    Ok(bona_fide_scores.iter().filter(|&&s| s >= threshold).count() as f64 / bona_fide_scores.len() as f64)
}

/// The highest threshold whose empirical MACER does not exceed `macer_target`.
pub fn threshold_at_macer(attack_scores: &[f64], macer_target: f64) -> Result<f64> {
    if attack_scores.is_empty() {
        return Err(Error::EmptyInput("attack scores"));
    }
    if !(macer_target > 0.0 && macer_target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "MACER target must lie in (0, 1), got {macer_target}"
        )));
    }
    order_statistic_threshold(attack_scores, macer_target)
}

/// BPCER at the operating point fixed by [`threshold_at_macer`]; BPCER10,
/// BPCER20 and BPCER100 use targets 0.1, 0.05 and 0.01.
pub fn bpcer_at_macer(bona_fide_scores: &[f64], attack_scores: &[f64], macer_target: f64) -> Result<f64> {
    if bona_fide_scores.is_empty() {
        return Err(Error::EmptyInput("bona fide scores"));
    }
    let t = threshold_at_macer(attack_scores, macer_target)?;
    bpcer(bona_fide_scores, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmadDetPoint {
    pub threshold: f64,
    pub macer: f64,
    pub bpcer: f64,
}

/// Error trade-off over every distinct observed score plus two sentinels.
pub fn dmad_det(bona_fide_scores: &[f64], attack_scores: &[f64]) -> Result<Vec<DmadDetPoint>> {
    if bona_fide_scores.is_empty() {
        return Err(Error::EmptyInput("bona fide scores"));
    }
    if attack_scores.is_empty() {
        return Err(Error::EmptyInput("attack scores"));
    }
    let bona = sorted(bona_fide_scores);
    let attack = sorted(attack_scores);
    Ok(candidate_thresholds(bona_fide_scores, attack_scores)
        .into_iter()
        .map(|t| DmadDetPoint {
            threshold: t,
            macer: frac_below(&attack, t),
            bpcer: 1.0 - frac_below(&bona, t),
        })
        .collect())
}
