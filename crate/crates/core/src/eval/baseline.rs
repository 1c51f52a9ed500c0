use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::cohort::VisitDataset;
use crate::filter::{FilterSpec, FilteredGraph};
use crate::ids::VisitId;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedCohort {
    pub name: String,
    pub visit_ids: BTreeSet<VisitId>,
}

/// Visits attached to the seed codes that carry at least one phenotype of
/// interest.
pub fn target_cohort(
    fg: &FilteredGraph,
    spec: &FilterSpec,
    dataset: &VisitDataset,
) -> BTreeSet<VisitId> {
    let seed_visits = fg.graph.visits_of(&spec.selected_codes);
    dataset
        .select(&seed_visits)
        .into_iter()
        .filter(|v| {
            v.phenotypes
                .iter()
                .any(|p| spec.phenotypes_of_interest.contains(p))
        })
        .map(|v| v.visit_id.clone())
        .collect()
}

/// The target cohort followed by one random cohort per requested size:
/// the target plus visits drawn uniformly without replacement from the rest
/// of the filtered graph. Cohort `i` is named `Random {i + 1}`.
pub fn build_baseline_cohorts(
    fg: &FilteredGraph,
    spec: &FilterSpec,
    dataset: &VisitDataset,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<NamedCohort>, EvalError> {
    let target = target_cohort(fg, spec, dataset);
    let pool: Vec<VisitId> = fg
        .graph
        .all_visits()
        .into_iter()
        .filter(|id| !target.contains(id))
        .collect();
    let available = target.len() + pool.len();

    let mut cohorts = vec![NamedCohort {
        name: "Target".to_owned(),
        visit_ids: target.clone(),
    }];
    for (i, &size) in sizes.iter().enumerate() {
        if size > available {
            return Err(EvalError::SizeTooLarge {
                requested: size,
                available,
            });
        }
        if size < target.len() {
            return Err(EvalError::SizeBelowTarget {
                requested: size,
                target: target.len(),
            });
        }
        let mut rng = rng::split(seed, i as u64);
        let mut shuffled = pool.clone();
        rng::shuffle(&mut rng, &mut shuffled);
        let mut visit_ids = target.clone();
        visit_ids.extend(shuffled.into_iter().take(size - target.len()));
        cohorts.push(NamedCohort {
            name: format!("Random {}", i + 1),
            visit_ids,
        });
    }
    Ok(cohorts)
}
