use serde::{Deserialize, Serialize};

use super::{PhenotypeVocabulary, VisitRecord};

/// Empirical distribution of phenotype occurrences over a set of visits.
///
/// A visit carrying `k` phenotypes contributes `k` occurrences, so `probs`
/// sums to one whenever at least one occurrence exists. With no occurrences
/// the distribution is empty: all-zero `probs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeDistribution {
    pub probs: Vec<f64>,
    /// Number of visits the distribution was computed from.
    pub support_count: usize,
}

impl PhenotypeDistribution {
    pub fn empty(len: usize) -> Self {
        Self {
            probs: vec![0.0; len],
            support_count: 0,
        }
    }

    /// Normalizes per-phenotype occurrence counts.
    pub fn from_counts(counts: &[u64], support_count: usize) -> Self {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Self {
                probs: vec![0.0; counts.len()],
                support_count,
            };
        }
        let total = total as f64;
        Self {
            probs: counts.iter().map(|&c| c as f64 / total).collect(),
            support_count,
        }
    }

    /// True when no phenotype occurrence backs this distribution.
    pub fn is_empty(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }
}

/// Computes the occurrence-normalized phenotype distribution of `visits`.
/// Phenotypes outside `vocabulary` are ignored.
pub fn phenotype_distribution<'a, I>(
    visits: I,
    vocabulary: &PhenotypeVocabulary,
) -> PhenotypeDistribution
where
    I: IntoIterator<Item = &'a VisitRecord>,
{
    let mut counts = vec![0u64; vocabulary.len()];
    let mut support = 0;
    for visit in visits {
        support += 1;
        for phenotype in &visit.phenotypes {
            if let Some(i) = vocabulary.position(phenotype) {
                counts[i] += 1;
            }
        }
    }
    if support == 0 {
        return PhenotypeDistribution::empty(vocabulary.len());
    }
    PhenotypeDistribution::from_counts(&counts, support)
}
