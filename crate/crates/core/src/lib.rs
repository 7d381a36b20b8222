//! Toolkit for face morphing attack research on pre-extracted embeddings.
//!
//! The crate covers the quantitative side of the workflow only; images never
//! enter it. Embeddings (one JSON object per line) are ingested by [`dataset`],
//! compared with cosine distance in [`similarity`], greedily paired for morphing
//! in [`pair_selection`], used to calibrate verification thresholds in
//! [`calibration`], and the resulting morph comparison scores are summarised by
//! the metrics in [`vulnerability`] (MMPMR, prodAvgMMPMR, RMMR, MAP).
//!
//! [`dmad`] implements differential morphing attack detection: a feature
//! standardizer, an RBF-kernel SVM trained with SMO, and MACER/BPCER metrics.
//! [`synthgen`] produces seeded synthetic populations so the pipeline can be
//! exercised end to end without face data.

pub mod calibration;
pub mod dataset;
pub mod dmad;
pub mod error;
pub mod formats;
pub mod pair_selection;
pub mod rng;
pub mod similarity;
pub mod synthgen;
pub mod vulnerability;

pub use calibration::{CalibrationResult, DetPoint, Orientation};
pub use dataset::{Demographics, EmbeddingRecord, MorphRecord, SubjectRoleSplit};
pub use dmad::{DifferentialSample, DmadModel, SampleLabel, Standardizer, SvmParams};
pub use error::{Error, Result};
pub use pair_selection::{MorphPair, SelectionMethod};
pub use similarity::{ScoreLabel, ScoreMatrix, ScoreSample};
pub use synthgen::SynthConfig;
pub use vulnerability::{MapMatrix, MorphComparisonSet, MorphScores, SubjectRule};
