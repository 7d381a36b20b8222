//! Embedding records: ingestion, validation and curation.
//!
//! The on-disk format is UTF-8 JSON Lines, one [`EmbeddingRecord`] object per
//! line. Blank lines and lines starting with `#` are ignored, which lets tools
//! prepend a provenance comment.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub subject_id: String,
    pub sample_id: String,
    /// Chronological order of the capture within its subject.
    pub capture_index: u32,
    pub age: u32,
    pub gender: String,
    pub ethnicity: String,
    pub embedding: Vec<f64>,
}

/// Soft-biometric labels used by the demographic consistency check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: u32,
    pub gender: String,
    pub ethnicity: String,
}

impl EmbeddingRecord {
    pub fn demographics(&self) -> Demographics {
        Demographics {
            age: self.age,
            gender: self.gender.clone(),
            ethnicity: self.ethnicity.clone(),
        }
    }

    /// Checks the per-record invariants; `line` is only used for error reporting.
    pub fn validate(&self, expected_dim: usize, line: usize) -> Result<()> {
        if self.subject_id.is_empty() || self.sample_id.is_empty() {
            return Err(Error::MalformedRecord {
                line,
                reason: "empty subject_id or sample_id".into(),
            });
        }
        if self.gender.is_empty() || self.ethnicity.is_empty() {
            return Err(Error::MalformedRecord {
                line,
                reason: "missing demographic label".into(),
            });
        }
        if self.embedding.len() != expected_dim {
            return Err(Error::DimensionMismatch {
                line,
                expected: expected_dim,
                found: self.embedding.len(),
            });
        }
        if let Some(index) = self.embedding.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { line, index });
        }
        Ok(())
    }
}

/// A morphed reference embedding and the two subjects it was made from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphRecord {
    pub morph_id: String,
    pub subject_a: String,
    pub subject_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morpher: Option<String>,
    pub embedding: Vec<f64>,
}

/// The sample reserved for morphing plus the probes used for verification.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRoleSplit {
    pub subject_id: String,
    pub morph_source: EmbeddingRecord,
    pub probes: Vec<EmbeddingRecord>,
}

pub fn load_dataset(path: impl AsRef<Path>, expected_dim: usize) -> Result<Vec<EmbeddingRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_records(BufReader::new(file), expected_dim)
        .map_err(|e| attach_path(e, &path.display().to_string()))
}

fn attach_path(err: Error, path: &str) -> Error {
    match err {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

/// Parses JSON Lines records from any reader. Output order follows input order.
pub fn read_records<R: BufRead>(reader: R, expected_dim: usize) -> Result<Vec<EmbeddingRecord>> {
    let lines: Vec<(usize, String)> = reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io("<reader>", e))?;

    let parsed: Vec<Option<Result<EmbeddingRecord>>> = lines
        .par_iter()
        .map(|(line, text)| {
            let trimmed = text.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                return None;
            }
            Some(parse_line(trimmed, *line, expected_dim))
        })
        .collect();

    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut records = Vec::with_capacity(parsed.len());
    for (entry, (line, _)) in parsed.into_iter().zip(&lines) {
        let Some(record) = entry else { continue };
        let record = record?;
        if !seen.insert((record.subject_id.clone(), record.sample_id.clone())) {
            return Err(Error::DuplicateSample {
                line: *line,
                subject_id: record.subject_id,
                sample_id: record.sample_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn parse_line(text: &str, line: usize, expected_dim: usize) -> Result<EmbeddingRecord> {
    let record: EmbeddingRecord =
        serde_json::from_str(text).map_err(|e| Error::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
    record.validate(expected_dim, line)?;
    Ok(record)
}

/// Loads a JSON Lines file of [`MorphRecord`]s (same comment rules as embeddings).
pub fn load_morphs(path: impl AsRef<Path>, expected_dim: usize) -> Result<Vec<MorphRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_morphs(BufReader::new(file), expected_dim).map_err(|e| attach_path(e, &path.display().to_string()))
}

pub fn read_morphs<R: BufRead>(reader: R, expected_dim: usize) -> Result<Vec<MorphRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::io("<reader>", e))?;
        let text = text.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let morph: MorphRecord = serde_json::from_str(text).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if morph.subject_a == morph.subject_b {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "a morph needs two distinct subjects".into(),
            });
        }
        if morph.embedding.len() != expected_dim {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected: expected_dim,
                found: morph.embedding.len(),
            });
        }
        if let Some(index) = morph.embedding.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { line: line_no, index });
        }
        if !seen.insert(morph.morph_id.clone()) {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: format!("duplicate morph_id {}", morph.morph_id),
            });
        }
        out.push(morph);
    }
    Ok(out)
}

pub fn write_morphs<W: Write>(mut writer: W, morphs: &[MorphRecord]) -> Result<()> {
    for morph in morphs {
        serde_json::to_writer(&mut writer, morph)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn write_records<W: Write>(mut writer: W, records: &[EmbeddingRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

/// Groups records by subject, preserving the order of first appearance.
pub fn group_by_subject(records: &[EmbeddingRecord]) -> Vec<(&str, Vec<&EmbeddingRecord>)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(&str, Vec<&EmbeddingRecord>)> = Vec::new();
    for record in records {
        let slot = *index.entry(record.subject_id.as_str()).or_insert_with(|| {
            groups.push((record.subject_id.as_str(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(record);
    }
    groups
}

/// Keeps only subjects with at least `min_samples` samples.
pub fn filter_min_samples(records: &[EmbeddingRecord], min_samples: usize) -> Vec<EmbeddingRecord> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for record in records {
        *counts.entry(record.subject_id.as_str()).or_default() += 1;
    }
    records
        .iter()
        .filter(|r| counts[r.subject_id.as_str()] >= min_samples)
        .cloned()
        .collect()
}

/// Orders a subject's samples chronologically; ties fall back to `sample_id`.
pub fn chronological<'a>(samples: &[&'a EmbeddingRecord]) -> Vec<&'a EmbeddingRecord> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| {
        a.capture_index
            .cmp(&b.capture_index)
            .then_with(|| a.sample_id.cmp(&b.sample_id))
    });
    sorted
}

/// Assigns the earliest capture of every subject to morphing and the rest to
/// verification. Splits are returned in order of first appearance.
pub fn split_roles(records: &[EmbeddingRecord]) -> Result<Vec<SubjectRoleSplit>> {
    group_by_subject(records)
        .into_iter()
        .map(|(subject_id, samples)| {
            if samples.len() < 2 {
                return Err(Error::SingleSample(subject_id.to_string()));
            }
            let mut ordered = chronological(&samples).into_iter().cloned();
            let morph_source = ordered.next().expect("non-empty group");
            Ok(SubjectRoleSplit {
                subject_id: subject_id.to_string(),
                morph_source,
                probes: ordered.collect(),
            })
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn record(subject: &str, sample: &str, capture: u32, embedding: Vec<f64>) -> EmbeddingRecord {
    EmbeddingRecord {
        subject_id: subject.into(),
        sample_id: sample.into(),
        capture_index: capture,
        age: 30,
        gender: "F".into(),
        ethnicity: "A".into(),
        embedding,
    }
}
