//! Seeded synthetic embedding populations for desk-scale experiments.
//!
//! Each subject gets a class centre drawn uniformly on the unit hypersphere.
//! A sample's direction is the centre perturbed by isotropic Gaussian noise
//! and renormalised; its magnitude grows linearly with a per-sample quality
//! drawn from `U[0, 1]`, mimicking embeddings whose norm tracks image quality.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{chronological, group_by_subject, EmbeddingRecord, MorphRecord};
use crate::error::{Error, Result};
use crate::pair_selection::MorphPair;
use crate::rng::{self, ExperimentRng};
use crate::similarity::norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub samples_per_subject: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of the direction noise.
    pub intra_class_noise: f64,
    pub magnitude_min: f64,
    pub magnitude_max: f64,
    pub genders: usize,
    pub ethnicities: usize,
    pub age_min: u32,
    pub age_max: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 200,
            samples_per_subject: 5,
            dim: 64,
            intra_class_noise: 0.08,
            magnitude_min: 10.0,
            magnitude_max: 30.0,
            genders: 2,
            ethnicities: 2,
            age_min: 20,
            age_max: 60,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.n_subjects < 2 {
            return fail("n_subjects must be at least 2");
        }
        if self.samples_per_subject < 1 {
            return fail("samples_per_subject must be at least 1");
        }
        if self.dim < 2 {
            return fail("dim must be at least 2");
        }
        if !(self.intra_class_noise.is_finite() && self.intra_class_noise > 0.0) {
            return fail("intra_class_noise must be positive");
        }
        if !(self.magnitude_min > 0.0 && self.magnitude_min <= self.magnitude_max && self.magnitude_max.is_finite()) {
            return fail("magnitudes must satisfy 0 < min <= max");
        }
        if self.genders == 0 || self.ethnicities == 0 {
            return fail("demographic alphabets must be non-empty");
        }
        if self.age_min > self.age_max {
            return fail("age_min must not exceed age_max");
        }
        Ok(())
    }
}

fn gaussian_vector(rng: &mut ExperimentRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

fn unit_vector(rng: &mut ExperimentRng, dim: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vector(rng, dim);
        if norm(&g) > 1e-12 {
            return normalized(&g);
        }
    }
}

/// Magnitude for a quality in `[0, 1]`.
pub fn magnitude_for_quality(config: &SynthConfig, quality: f64) -> f64 {
    config.magnitude_min + (config.magnitude_max - config.magnitude_min) * quality
}

pub fn generate_population(config: &SynthConfig) -> Result<Vec<EmbeddingRecord>> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);
    let width = config.n_subjects.to_string().len();
    let mut out = Vec::with_capacity(config.n_subjects * config.samples_per_subject);
    for s in 0..config.n_subjects {
        let centre = unit_vector(&mut rng, config.dim);
        let gender = format!("G{}", rng.random_range(0..config.genders));
        let ethnicity = format!("E{}", rng.random_range(0..config.ethnicities));
        let age = rng.random_range(config.age_min..=config.age_max);
        let subject_id = format!("subj{s:0width$}");
        for k in 0..config.samples_per_subject {
            let quality: f64 = rng.random();
            let noise = gaussian_vector(&mut rng, config.dim);
            let raw: Vec<f64> = centre
                .iter()
                .zip(&noise)
                .map(|(c, g)| c + config.intra_class_noise * g)
                .collect();
            let magnitude = magnitude_for_quality(config, quality);
            let embedding = normalized(&raw).into_iter().map(|x| x * magnitude).collect();
            out.push(EmbeddingRecord {
                subject_id: subject_id.clone(),
                sample_id: format!("{k}"),
                capture_index: k as u32,
                age,
                gender: gender.clone(),
                ethnicity: ethnicity.clone(),
                embedding,
            });
        }
    }
    Ok(out)
}

/// Midpoint morph of two embeddings.
///
/// The direction is the normalised sum of the parents' unit directions,
/// optionally perturbed by `noise * N(0, I)` and renormalised; the magnitude
/// is the mean of the parents' magnitudes.
pub fn morph_embedding(e_a: &[f64], e_b: &[f64], noise: f64, rng: &mut ExperimentRng) -> Result<Vec<f64>> {
    if e_a.len() != e_b.len() {
        return Err(Error::LengthMismatch(e_a.len(), e_b.len()));
    }
    if noise.is_nan() || noise < 0.0 {
        return Err(Error::InvalidParameter("morph noise must be non-negative".into()));
    }
    let (na, nb) = (norm(e_a), norm(e_b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mid: Vec<f64> = e_a.iter().zip(e_b).map(|(a, b)| a / na + b / nb).collect();
    if norm(&mid) < 1e-9 {
        return Err(Error::AntipodalParents);
    }
    let mut direction = normalized(&mid);
    if noise > 0.0 {
        let g = gaussian_vector(rng, direction.len());
        let perturbed: Vec<f64> = direction.iter().zip(&g).map(|(d, g)| d + noise * g).collect();
        direction = normalized(&perturbed);
    }
    let magnitude = (na + nb) / 2.0;
    Ok(direction.into_iter().map(|x| x * magnitude).collect())
}

pub fn generate_morph_embedding(e_a: &[f64], e_b: &[f64], noise: f64, seed: u64) -> Result<Vec<f64>> {
    morph_embedding(e_a, e_b, noise, &mut rng::seeded(seed))
}

/// Morphs the earliest capture of each paired subject, in pair order.
pub fn generate_morphs(
    records: &[EmbeddingRecord],
    pairs: &[MorphPair],
    noise: f64,
    morpher: &str,
    seed: u64,
) -> Result<Vec<MorphRecord>> {
    let sources: HashMap<&str, &EmbeddingRecord> = group_by_subject(records)
        .into_iter()
        .map(|(s, samples)| (s, chronological(&samples)[0]))
        .collect();
    let mut rng = rng::seeded(seed);
    pairs
        .iter()
        .map(|pair| {
            let lookup = |s: &str| {
                sources
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::InsufficientData(format!("no embedding for subject {s}")))
            };
            let (a, b) = (lookup(&pair.subject_a)?, lookup(&pair.subject_b)?);
            Ok(MorphRecord {
                morph_id: format!("{}+{}", pair.subject_a, pair.subject_b),
                subject_a: pair.subject_a.clone(),
                subject_b: pair.subject_b.clone(),
                morpher: Some(morpher.to_string()),
                embedding: morph_embedding(&a.embedding, &b.embedding, noise, &mut rng)?,
            })
        })
        .collect()
}
