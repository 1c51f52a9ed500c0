use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;

use crate::ids::ConceptCode;
use crate::rng::unit_f64;

/// Monte-Carlo selection: each scored candidate is accepted independently
/// with probability `sampling_rate`.
///
/// Candidates are visited in ascending code order and consume exactly one
/// uniform draw each, so the outcome depends only on the generator state and
/// the candidate set.
pub fn mc_sample<R: RngCore + ?Sized>(
    rng: &mut R,
    sampling_rate: f64,
    scored: &BTreeMap<ConceptCode, f64>,
) -> BTreeSet<ConceptCode> {
    scored
        .keys()
        .filter(|_| unit_f64(rng) < sampling_rate)
        .cloned()
        .collect()
}
