//! Seeded synthetic ontology and visit generator.
//!
//! The ontology is a random tree (bounded fan-out) with optional extra
//! parent edges. One subtree is designated the signal subtree: its nodes get
//! a phenotype profile of their own, and when `signal_locality` is on, task
//! labels of visits coded there depend on the features while labels
//! elsewhere are coin flips.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::io::{write_edges, write_labels, write_visits, write_vocabulary};
use super::{
    DataError, PhenotypeVocabulary, VisitDataset, VisitRecord, EDGES_FILE, LABELS_FILE,
    MANIFEST_FILE, VISITS_FILE, VOCABULARY_FILE,
};
use crate::eval::TaskSpec;
use crate::ids::{ConceptCode, VisitId};
use crate::rng::{self, SeededRng, RNG_ALGORITHM};

/// Phenotype names used when the vocabulary has at most nine entries.
pub const CARDIAC_PHENOTYPES: [&str; 9] = [
    "Congestive heart failure; nonhypertensive",
    "Cardiac dysrhythmias",
    "Essential hypertension",
    "Fluid and electrolyte disorders",
    "Hypertension with complications and secondary hypertension",
    "Acute myocardial infarction",
    "Other lower respiratory disease",
    "Other upper respiratory disease",
    "Respiratory failure; insufficiency; arrest (adult)",
];

const SEED_LEVEL: usize = 2;

pub const MORTALITY_TASK: &str = "mortality";
pub const PHENOTYPING_TASK: &str = "myocardial_infarction";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub node_count: usize,
    /// Upper bound on tree children per node.
    pub max_children: usize,
    /// Chance that a node receives a second parent.
    #[serde(default = "defaults::extra_parent_prob")]
    pub extra_parent_prob: f64,
    pub visit_count: usize,
    pub feature_dim: usize,
    pub vocabulary_size: usize,
    pub signal_locality: bool,
    /// Desired share of nodes inside the signal subtree.
    #[serde(default = "defaults::signal_fraction")]
    pub signal_fraction: f64,
    /// Number of signal-subtree nodes proposed as seed codes.
    #[serde(default = "defaults::seed_count")]
    pub seed_count: usize,
    /// Phenotypes in each branch profile.
    #[serde(default = "defaults::profile_support")]
    pub profile_support: usize,
    /// Log-scale jitter applied to a profile from parent to child.
    #[serde(default = "defaults::profile_drift")]
    pub profile_drift: f64,
    #[serde(default = "defaults::positive_rate")]
    pub positive_rate: f64,
    /// Scale of the feature weights behind signal labels.
    #[serde(default = "defaults::signal_strength")]
    pub signal_strength: f64,
    /// Chance that a visit also carries its concept's parent code.
    #[serde(default = "defaults::second_code_prob")]
    pub second_code_prob: f64,
}

mod defaults {
    pub fn extra_parent_prob() -> f64 {
        0.8
    }
    pub fn signal_fraction() -> f64 {
        0.25
    }
    pub fn seed_count() -> usize {
        4
    }
    pub fn profile_support() -> usize {
        3
    }
    pub fn profile_drift() -> f64 {
        0.8
    }
    pub fn positive_rate() -> f64 {
        0.25
    }
    pub fn signal_strength() -> f64 {
        2.0
    }
    pub fn second_code_prob() -> f64 {
        0.2
    }
}

impl SynthConfig {
    /// Default-shaped config with the given sizes.
    pub fn new(node_count: usize, visit_count: usize) -> Self {
        Self {
            node_count,
            max_children: 4,
            extra_parent_prob: defaults::extra_parent_prob(),
            visit_count,
            feature_dim: 48,
            vocabulary_size: 9,
            signal_locality: true,
            signal_fraction: defaults::signal_fraction(),
            seed_count: defaults::seed_count(),
            profile_support: defaults::profile_support(),
            profile_drift: defaults::profile_drift(),
            positive_rate: defaults::positive_rate(),
            signal_strength: defaults::signal_strength(),
            second_code_prob: defaults::second_code_prob(),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.to_owned()));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.node_count < 2 {
            return bad("node_count must be at least 2");
        }
        if self.max_children == 0 {
            return bad("max_children must be positive");
        }
        if self.vocabulary_size == 0 {
            return bad("vocabulary_size must be positive");
        }
        if self.profile_support == 0 || self.profile_support > self.vocabulary_size {
            return bad("profile_support must be in 1..=vocabulary_size");
        }
        if !(self.signal_fraction > 0.0 && self.signal_fraction < 1.0) {
            return bad("signal_fraction must be in (0, 1)");
        }
        if !(prob(self.extra_parent_prob) && prob(self.second_code_prob)) {
            return bad("probabilities must be in [0, 1]");
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad("positive_rate must be in (0, 1)");
        }
        if !(self.signal_strength.is_finite() && self.signal_strength >= 0.0) {
            return bad("signal_strength must be non-negative");
        }
        if !(self.profile_drift.is_finite() && self.profile_drift >= 0.0) {
            return bad("profile_drift must be non-negative");
        }
        if self.seed_count == 0 {
            return bad("seed_count must be positive");
        }
        Ok(())
    }
}

/// Facts about a generated dataset needed to use it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub seed: u64,
    pub rng_algorithm: String,
    pub node_count: usize,
    pub edge_count: usize,
    pub visit_count: usize,
    pub signal_root: ConceptCode,
    pub signal_codes: BTreeSet<ConceptCode>,
    pub seed_codes: BTreeSet<ConceptCode>,
    /// Phenotypes that dominate the signal subtree's profile.
    pub signal_phenotypes: BTreeSet<String>,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub edges: Vec<(ConceptCode, ConceptCode)>,
    pub labels: BTreeMap<ConceptCode, String>,
    pub dataset: VisitDataset,
    pub manifest: SynthManifest,
}

impl SyntheticData {
    /// Writes the standard data-directory files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir).map_err(|source| DataError::Io {
            path: dir.to_owned(),
            source,
        })?;
        write_edges(&dir.join(EDGES_FILE), &self.edges)?;
        write_labels(&dir.join(LABELS_FILE), &self.labels)?;
        write_visits(&dir.join(VISITS_FILE), self.dataset.visits())?;
        write_vocabulary(&dir.join(VOCABULARY_FILE), self.dataset.vocabulary())?;
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|source| DataError::Io { path, source })
    }
}

pub fn concept_code(i: usize) -> ConceptCode {
    ConceptCode::new(format!("{}", 1_000_000 + i))
}

pub fn vocabulary_names(size: usize) -> Vec<String> {
    (0..size)
        .map(|i| match CARDIAC_PHENOTYPES.get(i) {
            Some(name) if size <= CARDIAC_PHENOTYPES.len() => (*name).to_owned(),
            _ => format!("Phenotype {i:03}"),
        })
        .collect()
}

struct Tree {
    parent: Vec<Option<usize>>,
    extra: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl Tree {
    fn subtree(&self, root: usize) -> Vec<usize> {
        let mut out = vec![root];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out.sort_unstable();
        out
    }
}

fn grow_tree(config: &SynthConfig, rng: &mut SeededRng) -> Tree {
    let n = config.node_count;
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut depth = vec![0; n];
    let mut open: Vec<usize> = vec![0];
    for i in 1..n {
        let slot = rng::below(rng, open.len() as u64) as usize;
        let p = open[slot];
        parent[i] = Some(p);
        children[p].push(i);
        depth[i] = depth[p] + 1;
        if children[p].len() >= config.max_children {
            open.swap_remove(slot);
        }
        open.push(i);
    }
    Tree {
        parent,
        extra: vec![None; n],
        children,
        depth,
    }
}

fn pick_signal_root(tree: &Tree, config: &SynthConfig) -> usize {
    let n = tree.parent.len();
    let goal = (config.signal_fraction * n as f64).max(1.0);
    let sizes: Vec<usize> = (0..n).map(|i| tree.subtree(i).len()).collect();
    (1..n)
        .min_by(|&a, &b| {
            let da = (sizes[a] as f64 - goal).abs();
            let db = (sizes[b] as f64 - goal).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .unwrap_or(0)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

fn fresh_profile(vocab: usize, support: usize, avoid: &[usize], rng: &mut SeededRng) -> Vec<f64> {
    let gamma = Gamma::new(4.0, 1.0).expect("valid gamma");
    let mut order: Vec<usize> = (0..vocab).collect();
    rng::shuffle(rng, &mut order);
    // Prefer phenotypes outside `avoid`.
    order.sort_by_key(|i| avoid.contains(i));
    let mut profile = vec![0.0; vocab];
    for &i in order.iter().take(support) {
        profile[i] = gamma.sample(rng);
    }
    normalized(profile)
}

fn drift(profile: &[f64], sigma: f64, rng: &mut SeededRng) -> Vec<f64> {
    normalized(
        profile
            .iter()
            .map(|&p| {
                if p == 0.0 {
                    0.0
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    p * (sigma * z).exp()
                }
            })
            .collect(),
    )
}

fn draw_categorical(weights: &[f64], rng: &mut SeededRng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng::unit_f64(rng) * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Generates an ontology edge list and a visit dataset. Output is a pure
/// function of `(config, seed)`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SyntheticData, DataError> {
    config.validate()?;
    let mut rng = rng::split(seed, 0);
    let n = config.node_count;
    let mut tree = grow_tree(config, &mut rng);
    let signal_root = pick_signal_root(&tree, config);
    let signal_nodes = tree.subtree(signal_root);
    let mut in_signal = vec![false; n];
    for &i in &signal_nodes {
        in_signal[i] = true;
    }

    for i in 1..n {
        if rng::unit_f64(&mut rng) >= config.extra_parent_prob || i == signal_root {
            continue;
        }
        let j = rng::below(&mut rng, i as u64) as usize;
        // Extra parents never cross the signal boundary.
        if in_signal[j] == in_signal[i] && Some(j) != tree.parent[i] {
            tree.extra[i] = Some(j);
        }
    }

    // Phenotype profiles: each depth-1 branch draws its own support, the
    // signal root draws a fresh one avoiding its parent's.
    let vocab = config.vocabulary_size;
    let mut profiles: Vec<Vec<f64>> = vec![Vec::new(); n];
    profiles[0] = normalized(vec![1.0; vocab]);
    for i in 1..n {
        let p = tree.parent[i].expect("non-root has a parent");
        profiles[i] = if i == signal_root {
            let avoid: Vec<usize> = (0..vocab).filter(|&k| profiles[p][k] > 0.0).collect();
            fresh_profile(vocab, config.profile_support, &avoid, &mut rng)
        } else if p == 0 {
            fresh_profile(vocab, config.profile_support, &[], &mut rng)
        } else {
            drift(&profiles[p], config.profile_drift, &mut rng)
        };
    }

    let names = vocabulary_names(vocab);
    let vocabulary = PhenotypeVocabulary::new(names.clone())?;
    let dim = config.feature_dim;
    let bias = logit(config.positive_rate);
    let weights_for = |offset: usize| -> Vec<(usize, f64)> {
        if dim == 0 {
            return Vec::new();
        }
        let s = config.signal_strength;
        vec![(offset % dim, s), ((offset + 1) % dim, -0.8 * s)]
    };
    let tasks = [
        (MORTALITY_TASK, weights_for(0)),
        (PHENOTYPING_TASK, weights_for(2)),
    ];

    let mut visit_rng = rng::split(seed, 1);
    let patients = (config.visit_count * 4 / 5).max(1) as u64;
    let mut visits = Vec::with_capacity(config.visit_count);
    for v in 0..config.visit_count {
        let rng = &mut visit_rng;
        let node = rng::below(rng, n as u64) as usize;
        let mut codes = BTreeSet::from([concept_code(node)]);
        if let Some(p) = tree.parent[node] {
            if rng::unit_f64(rng) < config.second_code_prob {
                codes.insert(concept_code(p));
            }
        }

        let mut weights = profiles[node].clone();
        let first = draw_categorical(&weights, rng);
        let mut phenotypes = BTreeSet::from([names[first].clone()]);
        weights[first] = 0.0;
        if rng::unit_f64(rng) < 0.5 && weights.iter().any(|&w| w > 0.0) {
            phenotypes.insert(names[draw_categorical(&weights, rng)].clone());
        }

        let features: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                (z * 1e4).round() / 1e4
            })
            .collect();
        let local = !config.signal_locality || in_signal[node];
        let mut labels = BTreeMap::new();
        for (task, w) in &tasks {
            let p = if local {
                sigmoid(bias + w.iter().map(|&(k, c)| c * features[k]).sum::<f64>())
            } else {
                config.positive_rate
            };
            labels.insert((*task).to_owned(), u8::from(rng::unit_f64(rng) < p));
        }
        let duration_hours = (rng.random_range(6.0..240.0f64) * 10.0).round() / 10.0;

        visits.push(VisitRecord {
            visit_id: VisitId::new(format!("V{v:07}")),
            patient_id: format!("P{:06}", rng::below(rng, patients)),
            codes,
            phenotypes,
            features,
            labels,
            duration_hours,
        });
    }
    let dataset = VisitDataset::new(vocabulary, visits)?;

    let mut edges = Vec::new();
    for i in 1..n {
        let c = concept_code(i);
        edges.push((concept_code(tree.parent[i].expect("parent")), c.clone()));
        if let Some(j) = tree.extra[i] {
            edges.push((concept_code(j), c));
        }
    }
    edges.sort();

    let labels: BTreeMap<ConceptCode, String> = (0..n)
        .map(|i| {
            let kind = if i == signal_root {
                "signal root"
            } else if in_signal[i] {
                "signal concept"
            } else {
                "concept"
            };
            (
                concept_code(i),
                format!("{kind} {i} (depth {})", tree.depth[i]),
            )
        })
        .collect();

    let mut seed_pool: Vec<usize> = signal_nodes
        .iter()
        .copied()
        .filter(|&i| i != signal_root)
        .collect();
    // Seeds sit two levels under the signal root so that both hops stay inside the signal.
    let seed_rank = |i: usize| (tree.depth[i] - tree.depth[signal_root]).abs_diff(SEED_LEVEL);
    seed_pool.sort_by_key(|&i| (seed_rank(i), i));
    let mut seed_codes: BTreeSet<ConceptCode> = seed_pool
        .iter()
        .take(config.seed_count)
        .map(|&i| concept_code(i))
        .collect();
    if seed_codes.is_empty() {
        seed_codes.insert(concept_code(signal_root));
    }

    let signal_phenotypes = profiles[signal_root]
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, _)| names[k].clone())
        .collect();

    let manifest = SynthManifest {
        config: config.clone(),
        seed,
        rng_algorithm: RNG_ALGORITHM.to_owned(),
        node_count: n,
        edge_count: edges.len(),
        visit_count: dataset.len(),
        signal_root: concept_code(signal_root),
        signal_codes: signal_nodes.iter().map(|&i| concept_code(i)).collect(),
        seed_codes,
        signal_phenotypes,
        tasks: vec![
            TaskSpec {
                name: MORTALITY_TASK.to_owned(),
                label_key: MORTALITY_TASK.to_owned(),
                min_duration_hours: Some(48.0),
            },
            TaskSpec {
                name: PHENOTYPING_TASK.to_owned(),
                label_key: PHENOTYPING_TASK.to_owned(),
                min_duration_hours: None,
            },
        ],
    };
    Ok(SyntheticData {
        edges,
        labels,
        dataset,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::load_data_dir;
    use crate::graph::build_graph;

    fn small() -> SynthConfig {
        SynthConfig::new(60, 600)
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic(&small(), 7)
            .unwrap()
            .write_to(a.path())
            .unwrap();
        generate_synthetic(&small(), 7)
            .unwrap()
            .write_to(b.path())
            .unwrap();
        for file in [
            EDGES_FILE,
            LABELS_FILE,
            VISITS_FILE,
            VOCABULARY_FILE,
            MANIFEST_FILE,
        ] {
            assert_eq!(
                fs::read(a.path().join(file)).unwrap(),
                fs::read(b.path().join(file)).unwrap(),
                "{file}"
            );
        }
    }

    #[test]
    fn written_data_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_synthetic(&small(), 3).unwrap();
        data.write_to(dir.path()).unwrap();
        let back = load_data_dir(dir.path()).unwrap();
        assert_eq!(back.dataset, data.dataset);
        assert_eq!(back.edges, data.edges);
        assert_eq!(back.labels, data.labels);
    }

    #[test]
    fn zero_visits_is_valid() {
        let data = generate_synthetic(&SynthConfig::new(10, 0), 1).unwrap();
        assert!(data.dataset.is_empty());
        assert!(data.edges.len() >= 9);
    }

    #[test]
    fn structure_is_a_dag_with_signal_subtree() {
        let data = generate_synthetic(&small(), 11).unwrap();
        let (g, report) = build_graph(&data.edges, &data.dataset).unwrap();
        assert_eq!(report.unknown_visit_codes, 0);
        let m = &data.manifest;
        let mut subtree = g.descendants(&m.signal_root).unwrap();
        subtree.insert(m.signal_root.clone());
        assert_eq!(subtree, m.signal_codes);
        assert!(m.seed_codes.is_subset(&m.signal_codes));
        assert!(!m.seed_codes.contains(&m.signal_root));
        assert_eq!(m.tasks[0].min_duration_hours, Some(48.0));
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_synthetic(&small(), 1).unwrap();
        let b = generate_synthetic(&small(), 2).unwrap();
        assert_ne!(a.dataset, b.dataset);
        let ids: BTreeSet<&VisitId> = b.dataset.visits().map(|v| &v.visit_id).collect();
        assert_eq!(ids.len(), b.dataset.len());
    }

    #[test]
    fn invalid_configs() {
        let mut c = small();
        c.node_count = 1;
        assert!(matches!(
            generate_synthetic(&c, 0),
            Err(DataError::InvalidConfig(_))
        ));
        let mut c = small();
        c.profile_support = 20;
        assert!(generate_synthetic(&c, 0).is_err());
        let mut c = small();
        c.positive_rate = 1.0;
        assert!(generate_synthetic(&c, 0).is_err());
    }

    #[test]
    fn vocabulary_names_follow_size() {
        assert_eq!(vocabulary_names(9)[5], "Acute myocardial infarction");
        assert_eq!(vocabulary_names(12)[0], "Phenotype 000");
    }
}
