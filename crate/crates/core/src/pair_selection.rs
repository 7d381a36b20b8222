//! Morph pair pre-selection: greedy minimum-distance pairing under demographic
//! constraints, and a seeded random-pairing baseline with the same exclusion rules.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Demographics;
use crate::error::{Error, Result};
use crate::rng;
use crate::similarity::ScoreMatrix;

pub const DEFAULT_MAX_AGE_GAP: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Embedding,
    Random,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Embedding => "embedding",
            SelectionMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphPair {
    pub subject_a: String,
    pub subject_b: String,
    /// Cosine distance of the pair; absent for random pairing.
    pub distance: Option<f64>,
    pub method: SelectionMethod,
}

/// Same gender, same ethnicity and an age gap of at most `max_age_gap` years.
pub fn demographic_ok(a: &Demographics, b: &Demographics, max_age_gap: u32) -> bool {
    a.age.abs_diff(b.age) <= max_age_gap && a.gender == b.gender && a.ethnicity == b.ethnicity
}

/// Walks candidate cells in the given order, accepting a pair when both
/// subjects are still free and demographically compatible. Rejected cells are
/// simply skipped, which leaves both subjects available.
fn consume<I>(candidates: I, metadata: &[Demographics], max_age_gap: u32) -> Vec<(usize, usize)>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let n = metadata.len();
    let mut paired = vec![false; n];
    let mut free = n;
    let mut out = Vec::new();
    for (i, j) in candidates {
        if free < 2 {
            break;
        }
        if paired[i] || paired[j] {
            continue;
        }
        if demographic_ok(&metadata[i], &metadata[j], max_age_gap) {
            paired[i] = true;
            paired[j] = true;
            free -= 2;
            out.push((i, j));
        }
    }
    out
}

/// Greedy pre-selection over a score matrix.
///
/// Repeatedly takes the smallest live distance (ties in row-major order). A
/// compatible pair removes both subjects from further pairing; an incompatible
/// one removes only that cell. Masking never changes the relative order of the
/// remaining cells, so visiting the live cells once in ascending
/// `(distance, i, j)` order yields exactly the same trace as re-scanning the
/// matrix for its minimum after every step.
pub fn select_pairs(
    matrix: &ScoreMatrix,
    metadata: &[Demographics],
    max_age_gap: u32,
) -> Result<Vec<MorphPair>> {
    if matrix.len() != metadata.len() {
        return Err(Error::LengthMismatch(matrix.len(), metadata.len()));
    }
    let mut cells: Vec<(usize, usize, f64)> = matrix.unmasked().filter(|c| c.2.is_finite()).collect();
    cells.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let ids = matrix.subject_ids();
    let pairs = consume(cells.iter().map(|c| (c.0, c.1)), metadata, max_age_gap);
    Ok(pairs
        .into_iter()
        .map(|(i, j)| MorphPair {
            subject_a: ids[i].clone(),
            subject_b: ids[j].clone(),
            distance: matrix.get(i, j),
            method: SelectionMethod::Embedding,
        })
        .collect())
}

/// Random baseline pairing.
///
/// Every unordered subject pair is placed in a uniformly random order (a
/// ChaCha8-seeded Fisher-Yates shuffle) and consumed with the same rules as
/// [`select_pairs`]. Taking the next live pair of a uniform permutation is the
/// same as drawing uniformly among the live pairs at each step.
pub fn random_pairs(
    subject_ids: &[String],
    metadata: &[Demographics],
    max_age_gap: u32,
    seed: u64,
) -> Result<Vec<MorphPair>> {
    if subject_ids.len() != metadata.len() {
        return Err(Error::LengthMismatch(subject_ids.len(), metadata.len()));
    }
    let n = subject_ids.len();
    let mut candidates: Vec<(u32, u32)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            candidates.push((i, j));
        }
    }
    let mut rng = rng::seeded(seed);
    candidates.shuffle(&mut rng);

    let pairs = consume(
        candidates.into_iter().map(|(i, j)| (i as usize, j as usize)),
        metadata,
        max_age_gap,
    );
    Ok(pairs
        .into_iter()
        .map(|(i, j)| MorphPair {
            subject_a: subject_ids[i].clone(),
            subject_b: subject_ids[j].clone(),
            distance: None,
            method: SelectionMethod::Random,
        })
        .collect())
}
