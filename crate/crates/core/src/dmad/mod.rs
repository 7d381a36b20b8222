//! Differential morphing attack detection.
//!
//! A suspect reference embedding is compared with a trusted live capture by
//! subtraction (`document - probe`). Differences are standardized per
//! dimension and classified by an RBF-kernel SVM whose decision value is
//! positive for morph-like inputs.

mod metrics;
mod scaler;
mod svm;
mod training;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metrics::{bpcer, bpcer_at_macer, dmad_det, macer, threshold_at_macer, DmadDetPoint};
pub use scaler::Standardizer;
pub use svm::{default_gamma, kkt_violation, train_svm, RbfKernel, SvmModel, SvmParams, SvmTraining};
pub use training::{
    bona_fide_differentials, build_training_sets, morph_differentials, ClassBalance, TrainingSetConfig,
    TrainingSets,
};

pub const MODEL_FORMAT: &str = "morphkit-dmad";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleLabel {
    BonaFide,
    Morph,
}

impl SampleLabel {
    /// SVM target: morphs are the positive class.
    pub fn target(self) -> f64 {
        match self {
            SampleLabel::BonaFide => -1.0,
            SampleLabel::Morph => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SampleLabel::BonaFide => "bona-fide",
            SampleLabel::Morph => "morph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialSample {
    pub features: Vec<f64>,
    pub label: SampleLabel,
    pub source: String,
}

/// Element-wise `document - probe`.
pub fn differential(document: &[f64], probe: &[f64]) -> Result<Vec<f64>> {
    if document.len() != probe.len() {
        return Err(Error::LengthMismatch(document.len(), probe.len()));
    }
    Ok(document.iter().zip(probe).map(|(d, p)| d - p).collect())
}

/// A fitted detector: standardizer plus SVM on standardized differentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmadModel {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub standardizer: Standardizer,
    pub svm: SvmModel,
    /// Subjects held out from training, for evaluation on the same split.
    #[serde(default)]
    pub holdout_subjects: Vec<String>,
    /// Free-form provenance (resolved configuration, seeds).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// Fitted model plus the solver diagnostics of the run.
#[derive(Debug, Clone)]
pub struct DmadFit {
    pub model: DmadModel,
    pub training: SvmTraining,
    /// Standardized training features in input order.
    pub standardized: Vec<Vec<f64>>,
}

impl DmadModel {
    pub fn fit(samples: &[DifferentialSample], params: &SvmParams) -> Result<DmadFit> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("training samples"));
        }
        let raw: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
        let labels: Vec<f64> = samples.iter().map(|s| s.label.target()).collect();
        let standardizer = Standardizer::fit(&raw)?;
        let standardized = standardizer.apply_all(&raw)?;
        let training = train_svm(&standardized, &labels, params)?;
        let model = DmadModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            dim: standardizer.dim(),
            standardizer,
            svm: training.model.clone(),
            holdout_subjects: Vec::new(),
            metadata: serde_json::Value::Null,
        };
        Ok(DmadFit {
            model,
            training,
            standardized,
        })
    }

    /// Decision value for a raw differential; positive means morph.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        let z = self.standardizer.apply(features)?;
        Ok(self.svm.decision(&z))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: DmadModel = serde_json::from_reader(BufReader::new(file))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format {} v{}",
                model.format, model.version
            )));
        }
        if model.standardizer.dim() != model.dim
            || model.svm.support_vectors.iter().any(|sv| sv.len() != model.dim)
            || model.svm.support_vectors.len() != model.svm.dual_coef.len()
        {
            return Err(Error::InvalidParameter("model file is internally inconsistent".into()));
        }
        Ok(model)
    }
}
