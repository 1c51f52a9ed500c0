//! Ontology-guided cohort growth.
//!
//! Starting from the seed concepts and their descendants, each hop proposes
//! the parents of the current frontier (and of the frontier's descendants),
//! keeps the proposals whose phenotype distribution is close in KL divergence
//! to the frontier, and accepts each survivor with probability
//! `sampling_rate`. Accepted nodes and their descendants join the augmented
//! set and become the next frontier.

mod kl;
mod sample;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::filter::FilteredGraph;
use crate::graph::ConceptGraph;
use crate::ids::{ConceptCode, VisitId};
use crate::rng::{self, RNG_ALGORITHM};

pub(crate) use kl::Smoothed;
pub use kl::{kl_divergence, VocabularyMismatch, DEFAULT_SMOOTHING};
pub use sample::mc_sample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("seed code `{0}` is not in the filtered graph")]
    SeedOutsideFilteredGraph(ConceptCode),
    #[error("unknown concept code `{0}`")]
    UnknownCode(ConceptCode),
    #[error("invalid augmentation parameters: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    VocabularyMismatch(#[from] VocabularyMismatch),
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

/// Augmentation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub seed_codes: BTreeSet<ConceptCode>,
    /// Number of growth rounds.
    pub hops: u32,
    /// Strict upper bound on a candidate's minimum KL divergence. May be
    /// `+inf` (written as `"inf"` or `null` in JSON).
    #[serde(with = "threshold_serde")]
    pub kl_threshold: f64,
    pub sampling_rate: f64,
    pub rng_seed: u64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.hops == 0 {
            return Err(AugmentError::InvalidSpec("hops must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sampling_rate) {
            return Err(AugmentError::InvalidSpec(format!(
                "sampling_rate {} outside [0, 1]",
                self.sampling_rate
            )));
        }
        if self.kl_threshold.is_nan() || self.kl_threshold < 0.0 {
            return Err(AugmentError::InvalidSpec(format!(
                "kl_threshold {} must be non-negative",
                self.kl_threshold
            )));
        }
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return Err(AugmentError::InvalidSpec(format!(
                "smoothing {} must be positive",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// Serializes thresholds as JSON numbers, with `+inf` as the string `"inf"`.
pub mod threshold_serde {
    use super::*;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && *value > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*value)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
        Null(()),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Option::<Raw>::deserialize(d)? {
            Some(Raw::Number(v)) => Ok(v),
            None | Some(Raw::Null(())) => Ok(f64::INFINITY),
            Some(Raw::Text(t)) => match t.to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                other => other
                    .parse()
                    .map_err(|_| serde::de::Error::custom(format!("bad threshold `{t}`"))),
            },
        }
    }
}

/// Each key of the frontier maps to its descendants in the filtered graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrontierMap {
    pub entries: BTreeMap<ConceptCode, BTreeSet<ConceptCode>>,
}

impl FrontierMap {
    pub fn new<'a, I>(graph: &ConceptGraph, keys: I) -> Result<Self, AugmentError>
    where
        I: IntoIterator<Item = &'a ConceptCode>,
    {
        let mut entries = BTreeMap::new();
        for key in keys {
            let descendants = graph
                .descendants(key)
                .map_err(|_| AugmentError::UnknownCode(key.clone()))?;
            entries.insert(key.clone(), descendants);
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    SeedDescendant,
    Sampled,
    SampledDescendant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub origin: Origin,
    /// 0 for seeds and their descendants, otherwise the hop that added the node.
    pub hop: u32,
    /// Set for sampled nodes only.
    pub min_kl: Option<f64>,
}

/// Flat provenance record as written to manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub code: ConceptCode,
    pub origin: Origin,
    pub hop: u32,
    pub min_kl: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentResult {
    pub node_set: BTreeSet<ConceptCode>,
    pub provenance: BTreeMap<ConceptCode, Provenance>,
    pub cohort_visit_ids: BTreeSet<VisitId>,
    pub spec_echo: AugmentSpec,
    /// Hops that proposed at least one candidate.
    pub hops_completed: u32,
    /// Set when a hop found no candidates and growth stopped before `hops`.
    pub stopped_early_at: Option<u32>,
    pub rng_algorithm: String,
}

impl AugmentResult {
    pub fn provenance_entries(&self) -> Vec<ProvenanceEntry> {
        self.provenance
            .iter()
            .map(|(code, p)| ProvenanceEntry {
                code: code.clone(),
                origin: p.origin,
                hop: p.hop,
                min_kl: p.min_kl,
            })
            .collect()
    }

    pub fn codes_with_origin(&self, origin: Origin) -> BTreeSet<ConceptCode> {
        self.provenance
            .iter()
            .filter(|(_, p)| p.origin == origin)
            .map(|(c, _)| c.clone())
            .collect()
    }
}

type IndexFrontier = Vec<(usize, Vec<usize>)>;

fn index_frontier(graph: &ConceptGraph, keys: impl IntoIterator<Item = usize>) -> IndexFrontier {
    keys.into_iter()
        .map(|k| (k, graph.descendant_indices(k)))
        .collect()
}

fn frontier_to_indices(
    graph: &ConceptGraph,
    frontier: &FrontierMap,
) -> Result<IndexFrontier, AugmentError> {
    frontier
        .entries
        .iter()
        .map(|(key, desc)| {
            let k = graph
                .idx(key)
                .map_err(|_| AugmentError::UnknownCode(key.clone()))?;
            let d = desc
                .iter()
                .map(|c| {
                    graph
                        .idx(c)
                        .map_err(|_| AugmentError::UnknownCode(c.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((k, d))
        })
        .collect()
}

/// Per frontier key: parents of the key and of its descendants, minus the
/// key, its descendants, and anything flagged in `excluded`.
fn candidates_idx(
    graph: &ConceptGraph,
    frontier: &IndexFrontier,
    excluded: &[bool],
) -> Vec<(usize, Vec<usize>)> {
    frontier
        .iter()
        .map(|(key, desc)| {
            let mut out: BTreeSet<usize> = graph.parent_indices(*key).iter().copied().collect();
            for &child in desc {
                out.extend(graph.parent_indices(child).iter().copied());
            }
            out.remove(key);
            for d in desc {
                out.remove(d);
            }
            out.retain(|&c| !excluded[c]);
            (*key, out.into_iter().collect())
        })
        .collect()
}

fn score_idx(
    smoothed: &[Option<Smoothed>],
    frontier: &IndexFrontier,
    candidates: &[(usize, Vec<usize>)],
    kl_threshold: f64,
) -> BTreeMap<usize, f64> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for ((key, desc), (ckey, cands)) in frontier.iter().zip(candidates) {
        debug_assert_eq!(key, ckey);
        let references: &[usize] = if desc.is_empty() {
            std::slice::from_ref(key)
        } else {
            desc
        };
        for &q in cands {
            let mut min_kl = f64::INFINITY;
            if let Some(sq) = &smoothed[q] {
                for &r in references {
                    if let Some(sr) = &smoothed[r] {
                        min_kl = min_kl.min(sq.kl(sr));
                    }
                }
            }
            let entry = best.entry(q).or_insert(f64::INFINITY);
            *entry = entry.min(min_kl);
        }
    }
    best.retain(|_, kl| *kl < kl_threshold);
    best
}

fn smoothed_nodes(graph: &ConceptGraph, epsilon: f64) -> Vec<Option<Smoothed>> {
    graph
        .nodes()
        .map(|n| Smoothed::new(&n.phenotype_dist, epsilon))
        .collect()
}

/// Candidate parents for every frontier key, excluding nodes in `already`.
pub fn candidate_parents(
    fg: &FilteredGraph,
    frontier: &FrontierMap,
    already: &BTreeSet<ConceptCode>,
) -> Result<BTreeMap<ConceptCode, BTreeSet<ConceptCode>>, AugmentError> {
    let graph = &fg.graph;
    let idx_frontier = frontier_to_indices(graph, frontier)?;
    let mut excluded = vec![false; graph.len()];
    for code in already {
        if let Ok(i) = graph.idx(code) {
            excluded[i] = true;
        }
    }
    Ok(candidates_idx(graph, &idx_frontier, &excluded)
        .into_iter()
        .map(|(key, cands)| {
            (
                graph.node_at(key).code.clone(),
                cands
                    .into_iter()
                    .map(|c| graph.node_at(c).code.clone())
                    .collect(),
            )
        })
        .collect())
}

/// Minimum KL divergence of each candidate to the descendants of the frontier
/// key that proposed it (or to the key itself when it has none), minimized
/// over all proposing keys. Candidates at or above `kl_threshold` are dropped.
pub fn score_candidates(
    fg: &FilteredGraph,
    frontier: &FrontierMap,
    candidates: &BTreeMap<ConceptCode, BTreeSet<ConceptCode>>,
    kl_threshold: f64,
    smoothing: f64,
) -> Result<BTreeMap<ConceptCode, f64>, AugmentError> {
    let graph = &fg.graph;
    let idx_frontier = frontier_to_indices(graph, frontier)?;
    let mut idx_candidates = Vec::with_capacity(idx_frontier.len());
    for (key, _) in &idx_frontier {
        let code = &graph.node_at(*key).code;
        let cands = candidates
            .get(code)
            .map(|set| {
                set.iter()
                    .map(|c| {
                        graph
                            .idx(c)
                            .map_err(|_| AugmentError::UnknownCode(c.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?
            .unwrap_or_default();
        idx_candidates.push((*key, cands));
    }
    let smoothed = smoothed_nodes(graph, smoothing);
    Ok(
        score_idx(&smoothed, &idx_frontier, &idx_candidates, kl_threshold)
            .into_iter()
            .map(|(i, kl)| (graph.node_at(i).code.clone(), kl))
            .collect(),
    )
}

/// Pairwise KL divergences; the diagonal is zero.
pub fn kl_matrix(
    fg: &FilteredGraph,
    codes: &[ConceptCode],
    smoothing: f64,
) -> Result<Vec<Vec<f64>>, AugmentError> {
    let dists = codes
        .iter()
        .map(|c| {
            fg.graph
                .node(c)
                .map(|n| &n.phenotype_dist)
                .ok_or_else(|| AugmentError::UnknownCode(c.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut m = vec![vec![0.0; codes.len()]; codes.len()];
    for i in 0..codes.len() {
        for j in 0..codes.len() {
            if i != j {
                m[i][j] = kl_divergence(dists[i], dists[j], smoothing)?;
            }
        }
    }
    Ok(m)
}

/// Grows the seed set inside the filtered graph. Deterministic for a given
/// `(fg, spec)`.
pub fn augment(fg: &FilteredGraph, spec: &AugmentSpec) -> Result<AugmentResult, AugmentError> {
    spec.validate()?;
    let graph = &fg.graph;
    let seeds: Vec<usize> = spec
        .seed_codes
        .iter()
        .map(|c| {
            graph
                .idx(c)
                .map_err(|_| AugmentError::SeedOutsideFilteredGraph(c.clone()))
        })
        .collect::<Result<_, _>>()?;

    let n = graph.len();
    let mut provenance: BTreeMap<usize, Provenance> = BTreeMap::new();
    let mut in_ga = vec![false; n];
    for &s in &seeds {
        in_ga[s] = true;
        provenance.insert(
            s,
            Provenance {
                origin: Origin::Seed,
                hop: 0,
                min_kl: None,
            },
        );
    }
    let mut frontier = index_frontier(graph, seeds.iter().copied());
    for (_, desc) in &frontier {
        for &d in desc {
            if !in_ga[d] {
                in_ga[d] = true;
                provenance.insert(
                    d,
                    Provenance {
                        origin: Origin::SeedDescendant,
                        hop: 0,
                        min_kl: None,
                    },
                );
            }
        }
    }

    let smoothed = smoothed_nodes(graph, spec.smoothing);
    let mut rng = rng::seeded(spec.rng_seed);
    let mut hops_completed = 0;
    let mut stopped_early_at = None;
    for hop in 1..=spec.hops {
        let candidates = candidates_idx(graph, &frontier, &in_ga);
        if candidates.iter().all(|(_, c)| c.is_empty()) {
            stopped_early_at = Some(hop);
            break;
        }
        hops_completed = hop;
        let scored = score_idx(&smoothed, &frontier, &candidates, spec.kl_threshold);
        let by_code: BTreeMap<ConceptCode, f64> = scored
            .iter()
            .map(|(&i, &kl)| (graph.node_at(i).code.clone(), kl))
            .collect();
        let selected: Vec<usize> = mc_sample(&mut rng, spec.sampling_rate, &by_code)
            .iter()
            .map(|c| graph.idx(c).expect("sampled code in graph"))
            .collect();

        for &s in &selected {
            in_ga[s] = true;
            provenance.insert(
                s,
                Provenance {
                    origin: Origin::Sampled,
                    hop,
                    min_kl: Some(scored[&s]),
                },
            );
        }
        frontier = index_frontier(graph, selected.iter().copied());
        for (_, desc) in &frontier {
            for &d in desc {
                if !in_ga[d] {
                    in_ga[d] = true;
                    provenance.insert(
                        d,
                        Provenance {
                            origin: Origin::SampledDescendant,
                            hop,
                            min_kl: None,
                        },
                    );
                }
            }
        }
    }

    let node_set: BTreeSet<ConceptCode> = provenance
        .keys()
        .map(|&i| graph.node_at(i).code.clone())
        .collect();
    let cohort_visit_ids = graph.visits_of(&node_set);
    Ok(AugmentResult {
        provenance: provenance
            .into_iter()
            .map(|(i, p)| (graph.node_at(i).code.clone(), p))
            .collect(),
        node_set,
        cohort_visit_ids,
        spec_echo: spec.clone(),
        hops_completed,
        stopped_early_at,
        rng_algorithm: RNG_ALGORITHM.to_owned(),
    })
}
