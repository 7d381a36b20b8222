use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{differential, DifferentialSample, SampleLabel};
use crate::dataset::{chronological, group_by_subject, EmbeddingRecord, MorphRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetConfig {
    pub split_fraction: f64,
    pub seed: u64,
    /// Bona fide differentials per subject: capture 0 against captures 1..=p.
    pub bona_fide_pairs_per_subject: usize,
}

impl Default for TrainingSetConfig {
    fn default() -> Self {
        Self {
            split_fraction: 0.8,
            seed: 0,
            bona_fide_pairs_per_subject: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub train_bona_fide: usize,
    pub train_morph: usize,
    pub test_bona_fide: usize,
    pub test_morph: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingSets {
    pub train: Vec<DifferentialSample>,
    pub test: Vec<DifferentialSample>,
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub balance: ClassBalance,
}

/// Chronologically ordered samples per subject.
fn subject_captures(records: &[EmbeddingRecord]) -> HashMap<&str, Vec<&EmbeddingRecord>> {
    group_by_subject(records)
        .into_iter()
        .map(|(s, samples)| (s, chronological(&samples)))
        .collect()
}

/// Bona fide differentials (first capture minus later captures) for every
/// subject accepted by `keep`.
pub fn bona_fide_differentials(
    records: &[EmbeddingRecord],
    pairs_per_subject: usize,
    keep: impl Fn(&str) -> bool,
) -> Result<Vec<DifferentialSample>> {
    let mut out = Vec::new();
    for (subject, samples) in group_by_subject(records) {
        if !keep(subject) || samples.len() < 2 {
            continue;
        }
        let ordered = chronological(&samples);
        let document = ordered[0];
        for probe in ordered.iter().skip(1).take(pairs_per_subject) {
            out.push(DifferentialSample {
                features: differential(&document.embedding, &probe.embedding)?,
                label: SampleLabel::BonaFide,
                source: format!("{subject}/{}-{}", document.sample_id, probe.sample_id),
            });
        }
    }
    Ok(out)
}

/// Morph differentials: each morph minus the first probe (second capture) of
/// each contributing subject. Subjects without a probe contribute nothing.
pub fn morph_differentials(
    records: &[EmbeddingRecord],
    morphs: &[MorphRecord],
    keep: impl Fn(&MorphRecord) -> bool,
) -> Result<Vec<DifferentialSample>> {
    let captures = subject_captures(records);
    let mut out = Vec::new();
    for morph in morphs.iter().filter(|m| keep(m)) {
        for subject in [&morph.subject_a, &morph.subject_b] {
            let Some(probe) = captures.get(subject.as_str()).and_then(|c| c.get(1)) else {
                continue;
            };
            out.push(DifferentialSample {
                features: differential(&morph.embedding, &probe.embedding)?,
                label: SampleLabel::Morph,
                source: format!("{}@{subject}/{}", morph.morph_id, probe.sample_id),
            });
        }
    }
    Ok(out)
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Subject-disjoint train/test partition of bona fide and morph differentials.
///
/// Subjects linked by a morph form one unit, so every morph of a pair lands
/// on the same side as both of its subjects. Units are shuffled with the seed
/// and fill the training side up to `round(split_fraction * subjects)`.
pub fn build_training_sets(
    records: &[EmbeddingRecord],
    morphs: &[MorphRecord],
    config: &TrainingSetConfig,
) -> Result<TrainingSets> {
    if !(config.split_fraction > 0.0 && config.split_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {}",
            config.split_fraction
        )));
    }
    let mut subjects: Vec<&str> = group_by_subject(records).into_iter().map(|(s, _)| s).collect();
    let mut index: HashMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    for morph in morphs {
        for s in [morph.subject_a.as_str(), morph.subject_b.as_str()] {
            if !index.contains_key(s) {
                index.insert(s, subjects.len());
                subjects.push(s);
            }
        }
    }
    if subjects.len() < 2 {
        return Err(Error::InsufficientData("need at least two subjects".into()));
    }

    let mut sets = DisjointSets::new(subjects.len());
    for morph in morphs {
        sets.union(index[morph.subject_a.as_str()], index[morph.subject_b.as_str()]);
    }
    let mut units: Vec<Vec<usize>> = Vec::new();
    let mut unit_of_root: HashMap<usize, usize> = HashMap::new();
    for s in 0..subjects.len() {
        let root = sets.find(s);
        let u = *unit_of_root.entry(root).or_insert_with(|| {
            units.push(Vec::new());
            units.len() - 1
        });
        units[u].push(s);
    }
    units.shuffle(&mut rng::seeded(config.seed));

    let target = (config.split_fraction * subjects.len() as f64).round() as usize;
    let mut in_train = vec![false; subjects.len()];
    let mut train_count = 0;
    for unit in &units {
        if train_count + unit.len() <= target {
            train_count += unit.len();
            unit.iter().for_each(|&s| in_train[s] = true);
        }
    }

    let train_set: BTreeSet<&str> = (0..subjects.len()).filter(|&s| in_train[s]).map(|s| subjects[s]).collect();
    let is_train = |s: &str| train_set.contains(s);

    let pairs = config.bona_fide_pairs_per_subject;
    let mut train = bona_fide_differentials(records, pairs, is_train)?;
    train.extend(morph_differentials(records, morphs, |m| is_train(&m.subject_a))?);
    let mut test = bona_fide_differentials(records, pairs, |s| !is_train(s))?;
    test.extend(morph_differentials(records, morphs, |m| !is_train(&m.subject_a))?);

    let count = |set: &[DifferentialSample], label| set.iter().filter(|s| s.label == label).count();
    let balance = ClassBalance {
        train_bona_fide: count(&train, SampleLabel::BonaFide),
        train_morph: count(&train, SampleLabel::Morph),
        test_bona_fide: count(&test, SampleLabel::BonaFide),
        test_morph: count(&test, SampleLabel::Morph),
    };
    if balance.train_bona_fide == 0 || balance.train_morph == 0 {
        return Err(Error::InsufficientData(format!(
            "training split lacks a class ({} bona fide, {} morph)",
            balance.train_bona_fide, balance.train_morph
        )));
    }

    let (train_subjects, test_subjects): (Vec<&str>, Vec<&str>) =
        subjects.iter().partition(|s| is_train(s));
    Ok(TrainingSets {
        train,
        test,
        train_subjects: train_subjects.into_iter().map(String::from).collect(),
        test_subjects: test_subjects.into_iter().map(String::from).collect(),
        balance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::record;

    fn subjects(n: usize) -> Vec<EmbeddingRecord> {
        (0..n)
            .flat_map(|s| {
                (0..3u32).map(move |c| record(&format!("s{s}"), &format!("c{c}"), c, vec![s as f64, c as f64 + 1.0]))
            })
            .collect()
    }

    fn morph(id: &str, a: &str, b: &str) -> MorphRecord {
        MorphRecord {
            morph_id: id.into(),
            subject_a: a.into(),
            subject_b: b.into(),
            morpher: None,
            embedding: vec![0.5, 0.5],
        }
    }

    #[test]
    fn ten_subjects_split_eight_two() {
        let records = subjects(10);
        let morphs: Vec<_> = (0..5).map(|p| morph(&format!("m{p}"), &format!("s{}", 2 * p), &format!("s{}", 2 * p + 1))).collect();
        let sets = build_training_sets(&records, &morphs, &TrainingSetConfig::default()).unwrap();
        assert_eq!(sets.train_subjects.len(), 8);
        assert_eq!(sets.test_subjects.len(), 2);
    }

    #[test]
    fn morphs_of_a_pair_stay_together() {
        let records = subjects(20);
        let morphs: Vec<_> = (0..10)
            .flat_map(|p| {
                let (a, b) = (format!("s{}", 2 * p), format!("s{}", 2 * p + 1));
                ["ubo", "ntnu"].map(move |alg| morph(&format!("{alg}-{p}"), &a, &b))
            })
            .collect();
        for seed in 0..20 {
            let cfg = TrainingSetConfig { seed, ..TrainingSetConfig::default() };
            let sets = build_training_sets(&records, &morphs, &cfg).unwrap();
            let train: BTreeSet<_> = sets.train_subjects.iter().cloned().collect();
            for m in &morphs {
                assert_eq!(train.contains(&m.subject_a), train.contains(&m.subject_b));
            }
            for sample in &sets.test {
                if sample.label == SampleLabel::Morph {
                    let pair = sample.source.split('@').next().unwrap();
                    let m = morphs.iter().find(|m| m.morph_id == pair).unwrap();
                    assert!(!train.contains(&m.subject_a));
                }
            }
        }
    }

    #[test]
    fn balance_counts() {
        let records = subjects(10);
        let morphs = vec![morph("m0", "s0", "s1"), morph("m1", "s2", "s3")];
        let sets = build_training_sets(&records, &morphs, &TrainingSetConfig { seed: 3, ..Default::default() }).unwrap();
        let b = &sets.balance;
        assert_eq!(b.train_bona_fide + b.test_bona_fide, 10);
        assert_eq!(b.train_morph + b.test_morph, 4);
        assert_eq!(b.train_bona_fide + b.train_morph, sets.train.len());
        let again = build_training_sets(&records, &morphs, &TrainingSetConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(again.train_subjects, sets.train_subjects);
    }

    #[test]
    fn differential_orientation() {
        let records = subjects(1);
        let bona = bona_fide_differentials(&records, 2, |_| true).unwrap();
        // c0 = [0, 1], c1 = [0, 2], c2 = [0, 3].
        assert_eq!(bona[0].features, vec![0.0, -1.0]);
        assert_eq!(bona[1].features, vec![0.0, -2.0]);
        let m = morph_differentials(&records, &[morph("m", "s0", "zz")], |_| true).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].features, vec![0.5, -1.5]);
    }

    #[test]
    fn insufficient_data() {
        let records = subjects(3);
        assert!(build_training_sets(&records, &[], &TrainingSetConfig::default()).is_err());
        assert!(build_training_sets(&records, &[], &TrainingSetConfig { split_fraction: 1.0, ..Default::default() }).is_err());
    }
}
