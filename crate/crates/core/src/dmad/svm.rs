//! Soft-margin RBF-kernel SVM trained with sequential minimal optimization.
//!
//! The solver works on the dual
//!
//! ```text
//! min  1/2 a'Qa - e'a    s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j k(x_i, x_j)
//! ```
//!
//! choosing the working pair with second-order (maximal gain) selection and
//! stopping once the maximal KKT violation `m(a) - M(a)` drops below `tol`.
//! With the bias taken from the free vectors (or the midpoint of the feasible
//! interval when none are free) every training point then satisfies its KKT
//! condition to within `tol`.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Smallest curvature used when the pair's quadratic term degenerates.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub gamma: f64,
}

impl RbfKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-self.gamma * sq).exp()
    }
}

/// `1 / (D * v)` where `v` is the mean per-dimension variance; falls back to
/// `1.0` when the features carry no variance.
pub fn default_gamma<R: AsRef<[f64]>>(features: &[R]) -> f64 {
    let Some(first) = features.first() else {
        return 1.0;
    };
    let dim = first.as_ref().len();
    let n = features.len() as f64;
    let mut mean_var = 0.0;
    for d in 0..dim {
        let mean = features.iter().map(|f| f.as_ref()[d]).sum::<f64>() / n;
        mean_var += features.iter().map(|f| (f.as_ref()[d] - mean).powi(2)).sum::<f64>() / n;
    }
    mean_var /= dim as f64;
    if mean_var > 0.0 && dim > 0 {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// `None` selects [`default_gamma`] on the training features.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Kernel row cache budget in MiB.
    pub cache_mib: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iterations: 10_000_000,
            seed: 0,
            cache_mib: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: RbfKernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, coef)| coef * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Solver output: the model plus the full dual vector in input order.
#[derive(Debug, Clone)]
pub struct SvmTraining {
    pub model: SvmModel,
    pub alphas: Vec<f64>,
    /// Final `m(a) - M(a)`.
    pub kkt_gap: f64,
}

/// Per-point KKT residual for a dual solution.
///
/// `alpha = 0` needs `y f(x) >= 1`, `0 < alpha < C` needs `y f(x) = 1`,
/// and `alpha = C` needs `y f(x) <= 1`.
pub fn kkt_violation(alpha: f64, c: f64, label: f64, decision: f64) -> f64 {
    let margin = label * decision - 1.0;
    if alpha <= 0.0 {
        (-margin).max(0.0)
    } else if alpha >= c {
        margin.max(0.0)
    } else {
        margin.abs()
    }
}

struct KernelRows<'a> {
    x: &'a [&'a [f64]],
    kernel: RbfKernel,
    slots: Vec<Option<Arc<Vec<f64>>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [&'a [f64]], kernel: RbfKernel, cache_mib: usize) -> Self {
        let n = x.len();
        let row_bytes = (n * std::mem::size_of::<f64>()).max(1);
        let capacity = ((cache_mib << 20) / row_bytes).clamp(2, n.max(2));
        Self {
            x,
            kernel,
            slots: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> Arc<Vec<f64>> {
        if let Some(row) = &self.slots[i] {
            return Arc::clone(row);
        }
        let xi = self.x[i];
        let kernel = self.kernel;
        let row: Vec<f64> = self.x.par_iter().map(|xk| kernel.eval(xi, xk)).collect();
        let row = Arc::new(row);
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.slots[old] = None;
            }
        }
        self.slots[i] = Some(Arc::clone(&row));
        self.order.push_back(i);
        row
    }
}

/// Trains on already-standardized features. Labels must be `+1.0` or `-1.0`.
///
/// Samples are put into a canonical order (by label, then lexicographically by
/// features) and then shuffled with a ChaCha8 stream seeded from
/// `params.seed`; the result therefore depends on the seed but not on the
/// order in which the caller supplies the samples.
pub fn train_svm(features: &[Vec<f64>], labels: &[f64], params: &SvmParams) -> Result<SvmTraining> {
    let n = features.len();
    if n != labels.len() {
        return Err(Error::LengthMismatch(n, labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidParameter(format!("label {bad} is not +1 or -1")));
    }
    let has_pos = labels.iter().any(|&y| y > 0.0);
    let has_neg = labels.iter().any(|&y| y < 0.0);
    if !(has_pos && has_neg) {
        return Err(Error::SingleClass);
    }
    if !(params.c.is_finite() && params.c > 0.0 && params.tol.is_finite() && params.tol > 0.0) {
        return Err(Error::InvalidParameter("C and tol must be positive".into()));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::LengthMismatch(dim, bad.len()));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| {
        labels[a].total_cmp(&labels[b]).then_with(|| {
            features[a]
                .iter()
                .zip(&features[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    perm.shuffle(&mut rng::seeded(params.seed));

    let x: Vec<&[f64]> = perm.iter().map(|&p| features[p].as_slice()).collect();
    let y: Vec<f64> = perm.iter().map(|&p| labels[p]).collect();
    // Computed on the canonical order so the value does not depend on input order.
    let gamma = match params.gamma {
        Some(g) => g,
        None => default_gamma(&x),
    };
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let kernel = RbfKernel { gamma };
    let solved = smo(&x, &y, kernel, params);

    let mut alphas = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        alphas[p] = solved.alpha[k];
    }
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (k, &a) in solved.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[k].to_vec());
            dual_coef.push(a * y[k]);
        }
    }
    Ok(SvmTraining {
        model: SvmModel {
            kernel,
            c: params.c,
            support_vectors,
            dual_coef,
            bias: solved.bias,
            converged: solved.converged,
            iterations: solved.iterations,
        },
        alphas,
        kkt_gap: solved.gap,
    })
}

struct Solution {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
    iterations: usize,
    gap: f64,
}

fn smo(x: &[&[f64]], y: &[f64], kernel: RbfKernel, params: &SvmParams) -> Solution {
    let n = x.len();
    let c = params.c;
    let mut rows = KernelRows::new(x, kernel, params.cache_mib);
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective: G = Q a - e.
    let mut grad = vec![-1.0; n];

    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    while iterations < params.max_iterations {
        // First index: maximal violator in I_up.
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && -y[t] * grad[t] >= g_max {
                g_max = -y[t] * grad[t];
                i_sel = t;
            }
        }
        // Second index: maximal objective decrease among I_low.
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        let row_i = (i_sel != usize::MAX).then(|| rows.row(i_sel));
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= g_max2 {
                g_max2 = v;
            }
            if let Some(row_i) = &row_i {
                let grad_diff = g_max + v;
                if grad_diff > 0.0 {
                    // K_ii = K_tt = 1 for the RBF kernel.
                    let quad = (2.0 - 2.0 * row_i[t]).max(TAU);
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        gap = g_max + g_max2;
        if gap < params.tol || j_sel == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let row_i = row_i.expect("working index selected");
        let row_j = rows.row(j);
        let k_ij = row_i[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if y[i] != y[j] {
            let quad = (2.0 + 2.0 * k_ij * (y[i] * y[j])).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * k_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        // Q_ik = y_i y_k K_ik.
        for k in 0..n {
            grad[k] += y[k] * (y[i] * row_i[k] * di + y[j] * row_j[k] * dj);
        }
    }

    Solution {
        bias: bias_from_gradient(&alpha, y, &grad, c),
        alpha,
        converged,
        iterations,
        gap,
    }
}

/// Bias from the optimality conditions: mean of `-y_i G_i` over free vectors,
/// otherwise the midpoint of the interval allowed by the bounded ones.
fn bias_from_gradient(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for k in 0..alpha.len() {
        let yg = y[k] * grad[k];
        if alpha[k] >= c {
            if y[k] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[k] <= 0.0 {
            if y[k] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    -rho
}
