use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentResult, AugmentSpec, ProvenanceEntry};
use crate::filter::FilterSpec;
use crate::ids::ConceptCode;
use crate::rng::RNG_ALGORITHM;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestParameters {
    pub filter: Option<FilterSpec>,
    pub augment: Option<AugmentSpec>,
}

/// Sidecar metadata written next to an exported cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub parameters: ManifestParameters,
    pub seed: Option<u64>,
    pub rng_algorithm: String,
    pub selected_nodes: BTreeSet<ConceptCode>,
    pub augmented_nodes: Vec<ProvenanceEntry>,
    pub visit_count: usize,
    pub created_unix_ms: Option<u128>,
}

impl CohortManifest {
    pub fn for_augmentation(
        filter: Option<&FilterSpec>,
        result: &AugmentResult,
        created_unix_ms: Option<u128>,
    ) -> Self {
        Self {
            parameters: ManifestParameters {
                filter: filter.cloned(),
                augment: Some(result.spec_echo.clone()),
            },
            seed: Some(result.spec_echo.rng_seed),
            rng_algorithm: result.rng_algorithm.clone(),
            selected_nodes: result.spec_echo.seed_codes.clone(),
            augmented_nodes: result.provenance_entries(),
            visit_count: result.cohort_visit_ids.len(),
            created_unix_ms,
        }
    }

    /// Manifest for a filtered graph exported without augmentation.
    pub fn for_filter(
        filter: &FilterSpec,
        visit_count: usize,
        created_unix_ms: Option<u128>,
    ) -> Self {
        Self {
            parameters: ManifestParameters {
                filter: Some(filter.clone()),
                augment: None,
            },
            seed: None,
            rng_algorithm: RNG_ALGORITHM.to_owned(),
            selected_nodes: filter.selected_codes.clone(),
            augmented_nodes: Vec::new(),
            visit_count,
            created_unix_ms,
        }
    }
}
