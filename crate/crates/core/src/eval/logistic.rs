use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-3,
        }
    }
}

const CONVERGENCE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    /// Objective value at the start of each iteration.
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + dot(&self.weights, x)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2` (bias unpenalized), with its gradient
/// with respect to the weights and the bias.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    features: &[Vec<f64>],
    labels: &[u8],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_bias = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = bias + dot(weights, x);
        let y = f64::from(y);
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += residual * xi;
        }
        grad_bias += residual;
    }
    loss /= n;
    grad_bias /= n;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * dot(weights, weights);
    (loss, grad, grad_bias)
}

/// Full-batch gradient descent from zero initialization.
pub fn train_logistic(
    features: &[Vec<f64>],
    labels: &[u8],
    config: &LrConfig,
) -> Result<LogisticModel, EvalError> {
    if features.len() != labels.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "{} rows vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|x| x.len() != dim) {
        return Err(EvalError::ShapeMismatch("ragged feature rows".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteFeature);
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(EvalError::DegenerateLabels);
    }

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut converged = false;
    let mut loss_history = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let (loss, grad, grad_bias) =
            loss_and_gradient(&weights, bias, features, labels, config.l2);
        loss_history.push(loss);
        let norm = (dot(&grad, &grad) + grad_bias * grad_bias).sqrt();
        if norm < CONVERGENCE_TOLERANCE {
            converged = true;
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * g;
        }
        bias -= config.learning_rate * grad_bias;
    }
    Ok(LogisticModel {
        weights,
        bias,
        converged,
        loss_history,
    })
}

/// Per-feature z-scoring fitted on one set of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; dim];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            let sd = (*s / n).sqrt();
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        Self { means, scales }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}
