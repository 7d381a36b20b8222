//! Decision threshold calibration for distance-based verification.
//!
//! A comparison is a match iff its distance is strictly below the threshold.
//! FMR is therefore the fraction of non-mated scores `< t` and FNMR the
//! fraction of mated scores `>= t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TARGET_FMR: f64 = 0.001;

/// Score orientation of a comparison source. Similarity scores are negated on
/// ingestion so every downstream rule can assume "lower is more similar".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Distance,
    Similarity,
}

impl Orientation {
    pub fn to_distance(self, score: f64) -> f64 {
        match self {
            Orientation::Distance => score,
            Orientation::Similarity => -score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub frs_id: String,
    pub tau: f64,
    pub target_fmr: f64,
    pub achieved_fmr: f64,
    pub fnmr_at_tau: f64,
    pub det_points: Vec<DetPoint>,
}

pub(crate) fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Fraction of `sorted` strictly below `t`.
pub(crate) fn frac_below(sorted: &[f64], t: f64) -> f64 {
    sorted.partition_point(|&s| s < t) as f64 / sorted.len() as f64
}

/// Candidate thresholds: distinct observed scores plus one sentinel below and
/// one above the observed range (`min - 1`, `max + 1`; kept finite for JSON).
pub(crate) fn candidate_thresholds(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let (lo, hi) = (all[0] - 1.0, all[all.len() - 1] + 1.0);
    let mut out = Vec::with_capacity(all.len() + 2);
    out.push(lo);
    out.extend(all);
    out.push(hi);
    out
}

pub fn det_curve(mated: &[f64], nonmated: &[f64]) -> Result<Vec<DetPoint>> {
    if mated.is_empty() {
        return Err(Error::EmptyInput("mated scores"));
    }
    if nonmated.is_empty() {
        return Err(Error::EmptyInput("non-mated scores"));
    }
    let mated_sorted = sorted(mated);
    let nonmated_sorted = sorted(nonmated);
    Ok(candidate_thresholds(mated, nonmated)
        .into_iter()
        .map(|t| DetPoint {
            threshold: t,
            fmr: frac_below(&nonmated_sorted, t),
            fnmr: 1.0 - frac_below(&mated_sorted, t),
        })
        .collect())
}

pub fn fmr_at_threshold(nonmated: &[f64], tau: f64) -> Result<f64> {
    if nonmated.is_empty() {
        return Err(Error::EmptyInput("non-mated scores"));
    }
    Ok(nonmated.iter().filter(|&&s| s < tau).count() as f64 / nonmated.len() as f64)
}

pub fn fnmr_at_threshold(mated: &[f64], tau: f64) -> Result<f64> {
    if mated.is_empty() {
        return Err(Error::EmptyInput("mated scores"));
    }
    Ok(mated.iter().filter(|&&s| s >= tau).count() as f64 / mated.len() as f64)
}

/// The k-th smallest score with `k = floor(target * n) + 1`.
///
/// Under the strict-less-than rule at most `k - 1` scores fall below it, so
/// the achieved rate never exceeds `target`.
pub(crate) fn order_statistic_threshold(scores: &[f64], target: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!(
            "target rate must lie in [0, 1), got {target}"
        )));
    }
    let s = sorted(scores);
    let n = s.len();
    let mut below = ((target * n as f64).floor() as usize).min(n - 1);
    // Guard against the product rounding up across an integer.
    while below > 0 && below as f64 / n as f64 > target {
        below -= 1;
    }
    Ok(s[below])
}

pub fn threshold_at_fmr(nonmated: &[f64], target: f64) -> Result<f64> {
    if nonmated.is_empty() {
        return Err(Error::EmptyInput("non-mated scores"));
    }
    order_statistic_threshold(nonmated, target)
}

pub fn calibrate(frs_id: &str, mated: &[f64], nonmated: &[f64], target_fmr: f64) -> Result<CalibrationResult> {
    let det_points = det_curve(mated, nonmated)?;
    let tau = threshold_at_fmr(nonmated, target_fmr)?;
    Ok(CalibrationResult {
        frs_id: frs_id.to_string(),
        tau,
        target_fmr,
        achieved_fmr: fmr_at_threshold(nonmated, tau)?,
        fnmr_at_tau: fnmr_at_threshold(mated, tau)?,
        det_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(points: &[DetPoint], t: f64) -> (f64, f64) {
        // Rates at an arbitrary t equal those at the smallest candidate >= t.
        let p = points.iter().find(|p| p.threshold >= t).unwrap();
        (p.fmr, p.fnmr)
    }

    #[test]
    fn det_reference_points() {
        let sep = det_curve(&[0.1], &[0.9]).unwrap();
        assert_eq!(at(&sep, 0.5), (0.0, 0.0));
        let inv = det_curve(&[0.9], &[0.1]).unwrap();
        assert_eq!(at(&inv, 0.5), (1.0, 1.0));
        let mixed = det_curve(&[0.1, 0.3], &[0.2, 0.4]).unwrap();
        assert_eq!(at(&mixed, 0.25), (0.5, 0.5));
        assert_eq!(fmr_at_threshold(&[0.2, 0.4], 0.25).unwrap(), 0.5);
        assert_eq!(fnmr_at_threshold(&[0.1, 0.3], 0.25).unwrap(), 0.5);
    }

    #[test]
    fn det_covers_extremes() {
        let pts = det_curve(&[0.2, 0.3], &[0.5, 0.7]).unwrap();
        let first = pts.first().unwrap();
        let last = pts.last().unwrap();
        assert_eq!((first.fmr, first.fnmr), (0.0, 1.0));
        assert_eq!((last.fmr, last.fnmr), (1.0, 0.0));
        assert_eq!(pts.len(), 6);
    }

    #[test]
    fn det_rejects_empty() {
        assert!(matches!(det_curve(&[], &[0.1]), Err(Error::EmptyInput(_))));
        assert!(matches!(det_curve(&[0.1], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn ten_point_threshold() {
        let nonmated: Vec<f64> = (0..10).map(|i| 0.5 + 0.1 * i as f64).collect();
        let tau = threshold_at_fmr(&nonmated, 0.1).unwrap();
        assert_eq!(tau, nonmated[1]);
        assert!((tau - 0.6).abs() < 1e-12);
        assert_eq!(fmr_at_threshold(&nonmated, tau).unwrap(), 0.1);

        let zero = threshold_at_fmr(&nonmated, 0.0).unwrap();
        assert_eq!(zero, 0.5);
        assert_eq!(fmr_at_threshold(&nonmated, zero).unwrap(), 0.0);
        assert!(threshold_at_fmr(&nonmated, 1.0).is_err());
        assert!(threshold_at_fmr(&[], 0.1).is_err());
    }

    #[test]
    fn fnmr_reference_values() {
        assert!((fnmr_at_threshold(&[0.1, 0.2, 0.9], 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(fnmr_at_threshold(&[0.1, 0.2, 0.9], 0.95).unwrap(), 0.0);
        assert_eq!(fnmr_at_threshold(&[0.1, 0.2, 0.9], 0.1).unwrap(), 1.0);
        assert_eq!(fnmr_at_threshold(&[0.1, 0.2, 0.9], 0.05).unwrap(), 1.0);
        assert!(fnmr_at_threshold(&[], 0.5).is_err());
    }

    #[test]
    fn similarity_orientation_negates() {
        assert_eq!(Orientation::Similarity.to_distance(0.8), -0.8);
        assert_eq!(Orientation::Distance.to_distance(0.8), 0.8);
    }

    proptest! {
        #[test]
        fn det_is_monotone(
            mated in prop::collection::vec(0.0f64..2.0, 1..40),
            nonmated in prop::collection::vec(0.0f64..2.0, 1..40),
        ) {
            let pts = det_curve(&mated, &nonmated).unwrap();
            for w in pts.windows(2) {
                prop_assert!(w[0].threshold < w[1].threshold);
                prop_assert!(w[0].fmr <= w[1].fmr);
                prop_assert!(w[0].fnmr >= w[1].fnmr);
            }
        }

        #[test]
        fn swapped_labels_mirror(
            a in prop::collection::vec(0.0f64..2.0, 1..30),
            b in prop::collection::vec(0.0f64..2.0, 1..30),
        ) {
            let fwd = det_curve(&a, &b).unwrap();
            let rev = det_curve(&b, &a).unwrap();
            for (p, q) in fwd.iter().zip(&rev) {
                prop_assert_eq!(p.threshold, q.threshold);
                prop_assert!((p.fmr - (1.0 - q.fnmr)).abs() < 1e-12);
                prop_assert!((p.fnmr - (1.0 - q.fmr)).abs() < 1e-12);
            }
        }

        #[test]
        fn achieved_fmr_within_target(
            nonmated in prop::collection::vec(0.0f64..2.0, 1..200),
            target in 0.0f64..0.999,
        ) {
            let tau = threshold_at_fmr(&nonmated, target).unwrap();
            prop_assert!(fmr_at_threshold(&nonmated, tau).unwrap() <= target);
        }
    }
}
