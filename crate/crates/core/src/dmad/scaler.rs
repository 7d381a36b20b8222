use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension z-scoring with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions with zero training variance; their std is pinned to 1.
    #[serde(default)]
    pub constant_dims: Vec<usize>,
}

impl Standardizer {
    pub fn fit(features: &[Vec<f64>]) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::InsufficientData(
                "standardization needs at least two samples".into(),
            ));
        }
        let dim = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::LengthMismatch(dim, bad.len()));
        }
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            for (m, x) in mean.iter_mut().zip(f) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut var = vec![0.0; dim];
        for f in features {
            for ((v, x), m) in var.iter_mut().zip(f).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut constant_dims = Vec::new();
        let std = var
            .into_iter()
            .enumerate()
            .map(|(d, v)| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    constant_dims.push(d);
                    1.0
                }
            })
            .collect();
        Ok(Self {
            mean,
            std,
            constant_dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim() {
            return Err(Error::LengthMismatch(self.dim(), features.len()));
        }
        Ok(features
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn apply_all(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        features.iter().map(|f| self.apply(f)).collect()
    }
}
