//! Reduction of the concept graph to the user's region of interest.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::VisitDataset;
use crate::graph::ConceptGraph;
use crate::ids::ConceptCode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("seed code `{0}` is not in the graph")]
    UnknownSeedCode(ConceptCode),
    #[error("phenotype `{0}` is not in the vocabulary")]
    UnknownPhenotype(String),
    #[error("at least one seed code is required")]
    NoSeedCodes,
}

/// User filter parameters. All selections are disjunctive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub selected_codes: BTreeSet<ConceptCode>,
    pub phenotypes_of_interest: BTreeSet<String>,
    /// A node needs strictly more visits than this.
    pub min_visits: u64,
    /// Some phenotype of interest must be carried by strictly more visits
    /// of the node than this.
    pub min_phenotype_count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilteredGraph {
    pub graph: ConceptGraph,
    pub seed_codes: BTreeSet<ConceptCode>,
    pub qualifying_codes: BTreeSet<ConceptCode>,
    /// Codes kept because they descend from a qualifying code, without
    /// qualifying themselves.
    pub descendant_codes: BTreeSet<ConceptCode>,
    pub warnings: Vec<String>,
}

impl FilteredGraph {
    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }
}

/// True when `node` passes both thresholds of `spec`.
fn qualifies(graph: &ConceptGraph, i: usize, spec: &FilterSpec, interest: &[usize]) -> bool {
    let node = graph.node_at(i);
    node.visit_count() as u64 > spec.min_visits
        && interest
            .iter()
            .any(|&p| node.phenotype_counts[p] > spec.min_phenotype_count)
}

pub fn filter(graph: &ConceptGraph, spec: &FilterSpec) -> Result<FilteredGraph, FilterError> {
    if spec.selected_codes.is_empty() {
        return Err(FilterError::NoSeedCodes);
    }
    let seeds: Vec<usize> = spec
        .selected_codes
        .iter()
        .map(|c| {
            graph
                .idx(c)
                .map_err(|_| FilterError::UnknownSeedCode(c.clone()))
        })
        .collect::<Result<_, _>>()?;
    let interest: Vec<usize> = spec
        .phenotypes_of_interest
        .iter()
        .map(|p| {
            graph
                .vocabulary()
                .position(p)
                .ok_or_else(|| FilterError::UnknownPhenotype(p.clone()))
        })
        .collect::<Result<_, _>>()?;

    let n = graph.len();
    let qualifying: Vec<usize> = (0..n)
        .filter(|&i| qualifies(graph, i, spec, &interest))
        .collect();

    let mut in_candidates = vec![false; n];
    for &i in &qualifying {
        in_candidates[i] = true;
    }
    let mut is_desc = vec![false; n];
    for i in graph.reach(&qualifying, graph.child_lists()) {
        in_candidates[i] = true;
        is_desc[i] = true;
    }
    for &s in &seeds {
        in_candidates[s] = true;
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| in_candidates[i]).collect();
    let induced = graph.induced_by_indices(&candidates);

    let seed_set = &spec.selected_codes;
    let mut kept = BTreeSet::new();
    for component in induced.weakly_connected_components() {
        if component.iter().any(|c| seed_set.contains(c)) {
            kept.extend(component);
        }
    }
    let filtered = induced.induced_subgraph(&kept);

    let mut qualifying_codes = BTreeSet::new();
    let mut descendant_codes = BTreeSet::new();
    for code in filtered.codes() {
        let i = graph.idx(code).expect("filtered code comes from graph");
        if qualifies(graph, i, spec, &interest) {
            qualifying_codes.insert(code.clone());
        } else if is_desc[i] {
            descendant_codes.insert(code.clone());
        }
    }

    let mut warnings = Vec::new();
    if qualifying_codes.is_empty() {
        warnings.push("no node passed the visit and phenotype thresholds".to_owned());
    }
    if filtered.is_empty() {
        warnings.push("filtered graph is empty".to_owned());
    }
    Ok(FilteredGraph {
        graph: filtered,
        seed_codes: spec.selected_codes.clone(),
        qualifying_codes,
        descendant_codes,
        warnings,
    })
}

/// Chart-ready statistics over the visits of a filtered (or augmented) graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub total_visits: usize,
    pub node_count: usize,
    /// Per-node visit counts, descending by count then ascending by code.
    pub node_visit_counts: Vec<NodeCount>,
    /// Phenotype occurrence shares over all distinct visits, vocabulary order.
    pub phenotype_shares: Vec<PhenotypeShare>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCount {
    pub code: ConceptCode,
    pub visit_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeShare {
    pub phenotype: String,
    pub occurrences: u64,
    pub share: f64,
}

/// Summary over the nodes of `graph`. Visits shared by several nodes are
/// counted once in the totals and the phenotype shares.
pub fn summarize(graph: &ConceptGraph, dataset: &VisitDataset) -> SummaryStats {
    let mut node_visit_counts: Vec<NodeCount> = graph
        .nodes()
        .map(|n| NodeCount {
            code: n.code.clone(),
            visit_count: n.visit_count(),
        })
        .collect();
    node_visit_counts.sort_by(|a, b| {
        b.visit_count
            .cmp(&a.visit_count)
            .then_with(|| a.code.cmp(&b.code))
    });

    let visits = graph.all_visits();
    let vocabulary = graph.vocabulary();
    let mut occurrences = vec![0u64; vocabulary.len()];
    for visit in dataset.select(&visits) {
        for phenotype in &visit.phenotypes {
            if let Some(k) = vocabulary.position(phenotype) {
                occurrences[k] += 1;
            }
        }
    }
    let total: u64 = occurrences.iter().sum();
    let phenotype_shares = vocabulary
        .names()
        .iter()
        .zip(&occurrences)
        .map(|(name, &count)| PhenotypeShare {
            phenotype: name.clone(),
            occurrences: count,
            share: if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            },
        })
        .collect();

    SummaryStats {
        total_visits: visits.len(),
        node_count: graph.len(),
        node_visit_counts,
        phenotype_shares,
    }
}

pub fn filter_summary(fg: &FilteredGraph, dataset: &VisitDataset) -> SummaryStats {
    summarize(&fg.graph, dataset)
}
