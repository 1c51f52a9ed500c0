use thiserror::Error;

use crate::cohort::PhenotypeDistribution;

/// Additive smoothing applied to every coordinate before computing KL.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("distributions have different lengths ({left} vs {right})")]
pub struct VocabularyMismatch {
    pub left: usize,
    pub right: usize,
}

/// A distribution after smoothing, with its logarithms cached.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Smoothed {
    probs: Vec<f64>,
    logs: Vec<f64>,
}

impl Smoothed {
    /// `None` for the empty distribution.
    pub(crate) fn new(dist: &PhenotypeDistribution, epsilon: f64) -> Option<Self> {
        if dist.is_empty() {
            return None;
        }
        let total: f64 = dist.probs.iter().map(|&p| p + epsilon).sum();
        let probs: Vec<f64> = dist.probs.iter().map(|&p| (p + epsilon) / total).collect();
        let logs = probs.iter().map(|p| p.ln()).collect();
        Some(Self { probs, logs })
    }

    /// D_KL(self || other) in nats. Lengths must match.
    pub(crate) fn kl(&self, other: &Smoothed) -> f64 {
        debug_assert_eq!(self.probs.len(), other.probs.len());
        let mut sum = 0.0;
        for i in 0..self.probs.len() {
            sum += self.probs[i] * (self.logs[i] - other.logs[i]);
        }
        sum.max(0.0)
    }
}

/// D_KL(p || q) in nats after additive smoothing of both arguments.
///
/// Returns `+inf` when either argument is the empty distribution.
pub fn kl_divergence(
    p: &PhenotypeDistribution,
    q: &PhenotypeDistribution,
    epsilon: f64,
) -> Result<f64, VocabularyMismatch> {
    if p.len() != q.len() {
        return Err(VocabularyMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    match (Smoothed::new(p, epsilon), Smoothed::new(q, epsilon)) {
        (Some(p), Some(q)) => Ok(p.kl(&q)),
        _ => Ok(f64::INFINITY),
    }
}
