//! Cosine distances, pairwise score matrices and comparison score sampling.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{chronological, group_by_subject, EmbeddingRecord};
use crate::error::{Error, Result};
use crate::rng;

/// `1 - <a, b> / (|a| |b|)`, clamped to `[0, 2]` against rounding.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(cosine_with_norms(a, b, na, nb))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (1.0 - dot(a, b) / (na * nb)).clamp(0.0, 2.0)
}

/// Upper-triangular distance matrix over subjects. Masked cells hold NaN.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    subject_ids: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    /// Builds a fully masked matrix; callers fill cells with [`ScoreMatrix::set`].
    pub fn masked(subject_ids: Vec<String>) -> Self {
        let n = subject_ids.len();
        Self {
            subject_ids,
            values: vec![f64::NAN; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    /// The distance at `(i, j)`, or `None` when the cell is masked.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.len() + j];
        (!v.is_nan()).then_some(v)
    }

    /// Sets an upper-triangular cell. Lower-triangle and diagonal writes are ignored.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if i < j {
            let n = self.len();
            self.values[i * n + j] = value;
        }
    }

    pub fn mask(&mut self, i: usize, j: usize) {
        let n = self.len();
        self.values[i * n + j] = f64::NAN;
    }

    /// Masks row `k` and column `k`, removing every comparison involving subject `k`.
    pub fn mask_subject(&mut self, k: usize) {
        let n = self.len();
        for j in 0..n {
            self.values[k * n + j] = f64::NAN;
            self.values[j * n + k] = f64::NAN;
        }
    }

    /// Live cells in row-major order.
    pub fn unmasked(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(move |(idx, &v)| (idx / n, idx % n, v))
    }

    pub fn unmasked_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    /// The smallest live cell; ties resolve to the first cell in row-major order.
    pub fn argmin(&self) -> Option<(usize, usize, f64)> {
        self.unmasked()
            .fold(None, |best: Option<(usize, usize, f64)>, cell| match best {
                Some(b) if b.2 <= cell.2 => Some(b),
                _ => Some(cell),
            })
    }
}

/// Pairwise cosine distances for one embedding per subject. Rows are computed
/// in parallel; each cell is independent so the result does not depend on the
/// thread count.
pub fn build_score_matrix(subject_ids: Vec<String>, embeddings: &[&[f64]]) -> Result<ScoreMatrix> {
    let n = subject_ids.len();
    if n != embeddings.len() {
        return Err(Error::LengthMismatch(n, embeddings.len()));
    }
    if n < 2 {
        return Err(Error::InsufficientData(
            "a score matrix needs at least two subjects".into(),
        ));
    }
    let dim = embeddings[0].len();
    if let Some(bad) = embeddings.iter().find(|e| e.len() != dim) {
        return Err(Error::LengthMismatch(dim, bad.len()));
    }
    let norms: Vec<f64> = embeddings.iter().map(|e| norm(e)).collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroNorm);
    }

    let mut matrix = ScoreMatrix::masked(subject_ids);
    matrix
        .values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            for j in (i + 1)..n {
                row[j] = cosine_with_norms(embeddings[i], embeddings[j], norms[i], norms[j]);
            }
        });
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreLabel {
    Mated,
    NonMated,
    MatedMorph,
}

impl ScoreLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreLabel::Mated => "mated",
            ScoreLabel::NonMated => "non-mated",
            ScoreLabel::MatedMorph => "mated-morph",
        }
    }
}

impl std::str::FromStr for ScoreLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mated" => Ok(ScoreLabel::Mated),
            "non-mated" => Ok(ScoreLabel::NonMated),
            "mated-morph" => Ok(ScoreLabel::MatedMorph),
            other => Err(Error::InvalidParameter(format!("unknown score label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub label: ScoreLabel,
    pub score: f64,
    pub id_a: String,
    pub id_b: String,
}

fn sample_key(r: &EmbeddingRecord) -> String {
    format!("{}/{}", r.subject_id, r.sample_id)
}

fn compare(label: ScoreLabel, a: &EmbeddingRecord, b: &EmbeddingRecord) -> Result<ScoreSample> {
    Ok(ScoreSample {
        label,
        score: cosine_distance(&a.embedding, &b.embedding)?,
        id_a: sample_key(a),
        id_b: sample_key(b),
    })
}

/// Every unordered within-subject sample pair. Subjects with one sample add nothing.
pub fn mated_scores(records: &[EmbeddingRecord]) -> Result<Vec<ScoreSample>> {
    let mut out = Vec::new();
    for (_, samples) in group_by_subject(records) {
        let ordered = chronological(&samples);
        for (i, a) in ordered.iter().enumerate() {
            for b in &ordered[i + 1..] {
                out.push(compare(ScoreLabel::Mated, a, b)?);
            }
        }
    }
    Ok(out)
}

/// Flat view of cross-subject sample pairs `(i, j)`, `i < j`, with samples
/// laid out subject by subject. Pair `k` is located by binary search over the
/// per-row prefix counts, so the population is never materialised.
struct CrossPairs<'a> {
    samples: Vec<&'a EmbeddingRecord>,
    /// Index one past the end of the subject block that contains each sample.
    block_end: Vec<usize>,
    /// `prefix[i]` = number of cross pairs whose first member precedes sample `i`.
    prefix: Vec<usize>,
}

impl<'a> CrossPairs<'a> {
    fn new(records: &'a [EmbeddingRecord]) -> Self {
        let mut samples = Vec::with_capacity(records.len());
        let mut block_end = Vec::with_capacity(records.len());
        for (_, group) in group_by_subject(records) {
            let end = samples.len() + group.len();
            for r in chronological(&group) {
                samples.push(r);
                block_end.push(end);
            }
        }
        let n = samples.len();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0usize);
        for &end in &block_end {
            let last = *prefix.last().unwrap();
            prefix.push(last + (n - end));
        }
        Self {
            samples,
            block_end,
            prefix,
        }
    }

    fn population(&self) -> usize {
        *self.prefix.last().unwrap()
    }

    fn pair(&self, k: usize) -> (&'a EmbeddingRecord, &'a EmbeddingRecord) {
        // Largest i with prefix[i] <= k.
        let i = self.prefix.partition_point(|&p| p <= k) - 1;
        let j = self.block_end[i] + (k - self.prefix[i]);
        (self.samples[i], self.samples[j])
    }
}

/// Number of distinct cross-subject sample pairs in `records`.
pub fn nonmated_population(records: &[EmbeddingRecord]) -> usize {
    CrossPairs::new(records).population()
}

/// Draws `count` cross-subject pairs uniformly without replacement.
///
/// Pairs are indexed over the subject-grouped sample layout and the index set
/// is drawn with `rand::seq::index::sample` on a ChaCha8 stream seeded from
/// `seed`. Output is sorted by pair index, so it is a pure function of
/// `(records, count, seed)`.
pub fn nonmated_scores(records: &[EmbeddingRecord], count: usize, seed: u64) -> Result<Vec<ScoreSample>> {
    let pairs = CrossPairs::new(records);
    let available = pairs.population();
    if count > available {
        return Err(Error::SampleCountExceedsPopulation {
            requested: count,
            available,
        });
    }
    let mut rng = rng::seeded(seed);
    let mut picked = index::sample(&mut rng, available, count).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|k| {
            let (a, b) = pairs.pair(k);
            compare(ScoreLabel::NonMated, a, b)
        })
        .collect()
}

/// Uniformly samples `subset` subjects (all of them if fewer exist) and
/// returns their records in input order.
pub fn sample_subjects(records: &[EmbeddingRecord], subset: usize, seed: u64) -> Vec<EmbeddingRecord> {
    let groups = group_by_subject(records);
    if subset >= groups.len() {
        return records.to_vec();
    }
    let mut rng = rng::seeded(seed);
    let chosen: std::collections::HashSet<&str> = index::sample(&mut rng, groups.len(), subset)
        .into_iter()
        .map(|i| groups[i].0)
        .collect();
    records
        .iter()
        .filter(|r| chosen.contains(r.subject_id.as_str()))
        .cloned()
        .collect()
}
