//! C-SVM dual solved by SMO on a precomputed Gram matrix.
//!
//! Working-set selection takes the maximal violating pair; the stopping
//! criterion is the KKT gap `m(α) − M(α) < tol`. Ties go to the lowest
//! index, so training is deterministic.

use serde::{Deserialize, Serialize};

use super::GramEstimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    /// Iteration cap is `max_passes` times the training size.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub alpha: Vec<f64>,
    /// ±1 per training point.
    pub y: Vec<f64>,
    pub bias: f64,
    pub support: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Final KKT gap `m(α) − M(α)`.
    pub kkt_gap: f64,
}

impl BinarySvm {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|&i| self.alpha[i] * self.y[i] * row[i])
            .sum::<f64>()
            + self.bias
    }

    /// `Σα − ½ Σ α_i α_j y_i y_j K_ij`.
    pub fn dual_objective(&self, gram: &GramEstimate) -> f64 {
        let mut quad = 0.0;
        for &i in &self.support {
            for &j in &self.support {
                quad += self.alpha[i] * self.alpha[j] * self.y[i] * self.y[j] * gram.get(i, j);
            }
        }
        self.alpha.iter().sum::<f64>() - 0.5 * quad
    }
}

/// Binary model for two classes, one-vs-rest submodels otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: usize,
    pub params: SvmParams,
    pub submodels: Vec<BinarySvm>,
    pub train_size: usize,
}

impl SvmModel {
    /// One score per submodel.
    pub fn decision_values(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.train_size {
            return Err(Error::Dimension {
                expected: self.train_size,
                got: row.len(),
            });
        }
        Ok(self.submodels.iter().map(|m| m.decision(row)).collect())
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        let scores = self.decision_values(row)?;
        if self.classes == 2 {
            return Ok((scores[0] > 0.0) as usize);
        }
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        Ok(best)
    }
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Binary C-SVM on labels `y ∈ {+1, −1}`.
pub fn train_binary(gram: &GramEstimate, y: &[f64], params: &SvmParams) -> Result<BinarySvm> {
    let m = gram.size;
    if y.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: y.len(),
        });
    }
    let c = params.c;
    let k = |i: usize, j: usize| gram.values[i * m + j];
    let mut alpha = vec![0.0; m];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; m];
    let max_iter = params.max_passes.saturating_mul(m).max(1);
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        let (mut i, mut g_max) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut g_min) = (usize::MAX, f64::INFINITY);
        for t in 0..m {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], c) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t], c) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        gap = g_max - g_min;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = 1e-12;
        }
        if y[i] != y[j] {
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
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..m {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    // bias: mean over free vectors, else midpoint of the feasible interval
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..m {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    let support = (0..m).filter(|&t| alpha[t] > 0.0).collect();
    Ok(BinarySvm {
        alpha,
        y: y.to_vec(),
        bias: -rho,
        support,
        iterations,
        converged,
        kkt_gap: gap,
    })
}

/// Train on class labels `0..k`; two classes give one model with class 1
/// positive, more give one-vs-rest models.
pub fn train_svm(gram: &GramEstimate, labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    if labels.len() != gram.size {
        return Err(Error::Dimension {
            expected: gram.size,
            got: labels.len(),
        });
    }
    if gram.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite Gram entry".into()));
    }
    if params.c.is_nan() || params.c <= 0.0 {
        return Err(Error::Invalid(format!("C = {}", params.c)));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let present = (0..classes).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(Error::Invalid(
            "training labels contain a single class".into(),
        ));
    }
    let targets: Vec<usize> = if classes == 2 {
        vec![1]
    } else {
        (0..classes).collect()
    };
    let submodels = targets
        .iter()
        .map(|&c| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == c { 1.0 } else { -1.0 })
                .collect();
            train_binary(gram, &y, params)
        })
        .collect::<Result<_>>()?;
    Ok(SvmModel {
        classes,
        params: *params,
        submodels,
        train_size: gram.size,
    })
}
