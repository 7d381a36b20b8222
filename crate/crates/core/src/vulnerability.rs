//! Attack-potential metrics over mated morph comparison scores.
//!
//! All scores are distances; a probe verifies against a morph iff its
//! distance is strictly below the FRS threshold.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{chronological, group_by_subject, EmbeddingRecord, MorphRecord};
use crate::error::{Error, Result};
use crate::similarity::cosine_distance;

pub const DEFAULT_MAP_ATTEMPTS: usize = 4;

/// Probe distances of one morph under one FRS, one list per contributing subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphScores {
    pub morph_id: String,
    pub subjects: Vec<Vec<f64>>,
}

/// Probe distances of one morph under every FRS. `per_frs[f][n][i]` is the
/// distance of probe `i` of subject `n` as scored by FRS `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphComparisonSet {
    pub morph_id: String,
    pub per_frs: Vec<Vec<Vec<f64>>>,
}

/// One row of the morph comparison CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub morph_id: String,
    pub frs_id: String,
    /// 1-based index of the contributing subject.
    pub subject_slot: usize,
    pub probe_index: usize,
    pub distance: f64,
}

/// Morph comparisons across several FRSs, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub frs_ids: Vec<String>,
    pub morphs: Vec<MorphComparisonSet>,
}

impl ComparisonTable {
    /// Assembles rows; probes are ordered by `probe_index`. Every morph must
    /// have contiguous subject slots `1..=N` with `N >= 2` under each FRS it
    /// appears in.
    pub fn from_rows(rows: &[ComparisonRow]) -> Result<Self> {
        let mut frs_ids: Vec<String> = Vec::new();
        let mut frs_index: HashMap<&str, usize> = HashMap::new();
        let mut morph_index: HashMap<&str, usize> = HashMap::new();
        let mut morph_ids: Vec<&str> = Vec::new();
        // (morph, frs, slot) -> [(probe_index, distance)]
        let mut cells: HashMap<(usize, usize, usize), Vec<(usize, f64)>> = HashMap::new();

        for row in rows {
            if row.subject_slot == 0 {
                return Err(Error::InvalidParameter(format!(
                    "morph {}: subject_slot is 1-based",
                    row.morph_id
                )));
            }
            if !row.distance.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "morph {}: non-finite distance",
                    row.morph_id
                )));
            }
            let f = *frs_index.entry(row.frs_id.as_str()).or_insert_with(|| {
                frs_ids.push(row.frs_id.clone());
                frs_ids.len() - 1
            });
            let m = *morph_index.entry(row.morph_id.as_str()).or_insert_with(|| {
                morph_ids.push(row.morph_id.as_str());
                morph_ids.len() - 1
            });
            cells
                .entry((m, f, row.subject_slot - 1))
                .or_default()
                .push((row.probe_index, row.distance));
        }

        let mut morphs = Vec::with_capacity(morph_ids.len());
        for (m, morph_id) in morph_ids.iter().enumerate() {
            let mut per_frs = Vec::with_capacity(frs_ids.len());
            for (f, frs_id) in frs_ids.iter().enumerate() {
                let slots = (0..)
                    .take_while(|&n| cells.contains_key(&(m, f, n)))
                    .count();
                let present = cells.keys().filter(|k| k.0 == m && k.1 == f).count();
                if present != slots {
                    return Err(Error::InvalidParameter(format!(
                        "morph {morph_id} under {frs_id}: subject slots are not contiguous from 1"
                    )));
                }
                if present > 0 && present < 2 {
                    return Err(Error::InsufficientData(format!(
                        "morph {morph_id} under {frs_id} has a single contributing subject"
                    )));
                }
                let subjects = (0..slots)
                    .map(|n| {
                        let mut probes = cells[&(m, f, n)].clone();
                        probes.sort_by_key(|p| p.0);
                        probes.into_iter().map(|p| p.1).collect()
                    })
                    .collect();
                per_frs.push(subjects);
            }
            morphs.push(MorphComparisonSet {
                morph_id: morph_id.to_string(),
                per_frs,
            });
        }
        Ok(Self { frs_ids, morphs })
    }

    pub fn frs_position(&self, frs_id: &str) -> Option<usize> {
        self.frs_ids.iter().position(|f| f == frs_id)
    }

    /// Morphs scored by FRS `f` (morphs without scores under `f` are skipped).
    pub fn for_frs(&self, f: usize) -> Vec<MorphScores> {
        self.morphs
            .iter()
            .filter(|m| !m.per_frs[f].is_empty())
            .map(|m| MorphScores {
                morph_id: m.morph_id.clone(),
                subjects: m.per_frs[f].clone(),
            })
            .collect()
    }
}

/// Scores every morph against the verification probes of both contributing
/// subjects: slot 1 is `subject_a`, slot 2 is `subject_b`, and probes are the
/// captures after the earliest one (which is reserved for morphing).
pub fn morph_comparisons(
    records: &[EmbeddingRecord],
    morphs: &[MorphRecord],
    frs_id: &str,
) -> Result<Vec<ComparisonRow>> {
    let captures: HashMap<&str, Vec<&EmbeddingRecord>> = group_by_subject(records)
        .into_iter()
        .map(|(s, samples)| (s, chronological(&samples)))
        .collect();
    let mut rows = Vec::new();
    for morph in morphs {
        for (slot, subject) in [(1, &morph.subject_a), (2, &morph.subject_b)] {
            let probes = captures
                .get(subject.as_str())
                .map(|c| &c[1..])
                .filter(|p| !p.is_empty())
                .ok_or_else(|| {
                    Error::InsufficientData(format!(
                        "morph {}: subject {subject} has no verification probes",
                        morph.morph_id
                    ))
                })?;
            for (probe_index, probe) in probes.iter().enumerate() {
                rows.push(ComparisonRow {
                    morph_id: morph.morph_id.clone(),
                    frs_id: frs_id.to_string(),
                    subject_slot: slot,
                    probe_index,
                    distance: cosine_distance(&morph.embedding, &probe.embedding)?,
                });
            }
        }
    }
    Ok(rows)
}

/// How per-subject results combine into a morph-level success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectRule {
    /// At least one contributing subject verifies (minimum over subjects).
    Any,
    /// Every contributing subject verifies.
    #[default]
    All,
}

fn best_probe(probes: &[f64]) -> f64 {
    probes.iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_non_empty(set: &[MorphScores]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyInput("morph set"));
    }
    for m in set {
        if m.subjects.is_empty() || m.subjects.iter().any(|s| s.is_empty()) {
            return Err(Error::InsufficientData(format!(
                "morph {} has a subject without probe scores",
                m.morph_id
            )));
        }
    }
    Ok(())
}

/// Mated Morph Presentation Match Rate. Each subject is reduced to its best
/// (smallest) probe distance before the subject rule is applied.
pub fn mmpmr(set: &[MorphScores], tau: f64, rule: SubjectRule) -> Result<f64> {
    check_non_empty(set)?;
    let hits = set
        .iter()
        .filter(|m| {
            let minima = m.subjects.iter().map(|s| best_probe(s));
            let reduced = match rule {
                SubjectRule::Any => minima.fold(f64::INFINITY, f64::min),
                SubjectRule::All => minima.fold(f64::NEG_INFINITY, f64::max),
            };
            reduced < tau
        })
        .count();
    Ok(hits as f64 / set.len() as f64)
}

/// Mean over morphs of the product over subjects of each subject's fraction
/// of verifying probes.
pub fn prod_avg_mmpmr(set: &[MorphScores], tau: f64) -> Result<f64> {
    check_non_empty(set)?;
    let total: f64 = set
        .iter()
        .map(|m| {
            m.subjects
                .iter()
                .map(|probes| probes.iter().filter(|&&d| d < tau).count() as f64 / probes.len() as f64)
                .product::<f64>()
        })
        .sum();
    Ok(total / set.len() as f64)
}

pub fn rmmr(mmpmr_value: f64, fnmr_value: f64) -> f64 {
    mmpmr_value + fnmr_value
}

/// How verification attempts of different subjects combine in MAP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttemptRule {
    /// Successful attempts are counted per subject; the morph gets the
    /// smallest count over its subjects.
    #[default]
    Count,
    /// Attempt `k` succeeds only if probe `k` of every subject verifies.
    Paired,
}

/// `K x F` matrix; `values[i-1][j-1]` is the fraction of morphs with at least
/// `i` successful attempts on at least `j` systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMatrix {
    pub attempts: usize,
    pub frs_count: usize,
    pub values: Vec<Vec<f64>>,
}

impl MapMatrix {
    pub fn get(&self, attempts: usize, systems: usize) -> f64 {
        self.values[attempts - 1][systems - 1]
    }
}

/// Successful attempts of one morph under one FRS, using its first `attempts` probes.
pub fn attempt_successes(subjects: &[Vec<f64>], tau: f64, attempts: usize, rule: AttemptRule) -> usize {
    match rule {
        AttemptRule::Count => subjects
            .iter()
            .map(|probes| probes[..attempts].iter().filter(|&&d| d < tau).count())
            .min()
            .unwrap_or(0),
        AttemptRule::Paired => (0..attempts)
            .filter(|&k| subjects.iter().all(|probes| probes[k] < tau))
            .count(),
    }
}

pub fn map_matrix(
    table: &ComparisonTable,
    thresholds: &[f64],
    attempts: usize,
    rule: AttemptRule,
) -> Result<MapMatrix> {
    let frs_count = table.frs_ids.len();
    if thresholds.len() != frs_count {
        return Err(Error::LengthMismatch(frs_count, thresholds.len()));
    }
    if table.morphs.is_empty() {
        return Err(Error::EmptyInput("morph set"));
    }
    if attempts == 0 || frs_count == 0 {
        return Err(Error::InvalidParameter("MAP needs at least one attempt and one FRS".into()));
    }

    // reaching[i][j]: morphs with exactly j systems reaching >= i+1 successes.
    let mut reaching = vec![vec![0usize; frs_count + 1]; attempts];
    for morph in &table.morphs {
        let mut successes = Vec::with_capacity(frs_count);
        if morph.per_frs.len() != frs_count {
            return Err(Error::LengthMismatch(frs_count, morph.per_frs.len()));
        }
        for (f, subjects) in morph.per_frs.iter().enumerate() {
            if subjects.len() < 2 {
                return Err(Error::InsufficientProbes {
                    morph_id: morph.morph_id.clone(),
                    frs_id: table.frs_ids[f].clone(),
                    slot: subjects.len() + 1,
                    found: 0,
                    needed: attempts,
                });
            }
            for (n, probes) in subjects.iter().enumerate() {
                if probes.len() < attempts {
                    return Err(Error::InsufficientProbes {
                        morph_id: morph.morph_id.clone(),
                        frs_id: table.frs_ids[f].clone(),
                        slot: n + 1,
                        found: probes.len(),
                        needed: attempts,
                    });
                }
            }
            successes.push(attempt_successes(subjects, thresholds[f], attempts, rule));
        }
        for (i, row) in reaching.iter_mut().enumerate() {
            let systems = successes.iter().filter(|&&s| s > i).count();
            row[systems] += 1;
        }
    }

    let m = table.morphs.len() as f64;
    let values = reaching
        .into_iter()
        .map(|hist| {
            // Suffix sums: morphs with at least j systems.
            (1..=frs_count)
                .map(|j| hist[j..].iter().sum::<usize>() as f64 / m)
                .collect()
        })
        .collect();
    Ok(MapMatrix {
        attempts,
        frs_count,
        values,
    })
}

/// `w(i, j) = i * j`: more attempts and more fooled systems weigh more.
pub fn default_map_weights(attempts: usize, frs_count: usize) -> Vec<Vec<f64>> {
    (1..=attempts)
        .map(|i| (1..=frs_count).map(|j| (i * j) as f64).collect())
        .collect()
}

pub fn map_avg(map: &MapMatrix, weights: &[Vec<f64>]) -> Result<f64> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows != map.attempts || weights.iter().any(|r| r.len() != map.frs_count) {
        return Err(Error::ShapeMismatch {
            expected: (map.attempts, map.frs_count),
            found: (rows, cols),
        });
    }
    if weights.iter().flatten().any(|&w| !(w.is_finite() && w >= 0.0)) {
        return Err(Error::InvalidParameter("MAP weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("MAP weights sum to zero".into()));
    }
    let weighted: f64 = map
        .values
        .iter()
        .flatten()
        .zip(weights.iter().flatten())
        .map(|(v, w)| v * w)
        .sum();
    Ok(weighted / total)
}

/// Ascending ranks `1..=n`; tied values share the mean of their positions.
pub fn fractional_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end, averaged.
        let mean = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mean;
        }
        start = end;
    }
    ranks
}

/// Ranks each row and averages the ranks per column.
pub fn rank_average(table: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = table.first() else {
        return Err(Error::EmptyInput("rank table"));
    };
    let cols = first.len();
    for (row, values) in table.iter().enumerate() {
        if values.len() != cols {
            return Err(Error::NonRectangular {
                row,
                expected: cols,
                found: values.len(),
            });
        }
    }
    let mut sums = vec![0.0; cols];
    for values in table {
        for (s, r) in sums.iter_mut().zip(fractional_ranks(values)) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / table.len() as f64).collect())
}

/// Distinct sorted scores with the fraction of scores `<=` each.
pub fn ecdf_points(scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores"));
    }
    let sorted = crate::calibration::sorted(scores);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &s) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == s => last.1 = frac,
            _ => out.push((s, frac)),
        }
    }
    Ok(out)
}
