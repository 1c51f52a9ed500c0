#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use ontocohort::cohort::load_dataset;
use ontocohort::{ConceptCode, PhenotypeVocabulary, VisitDataset, VisitId, VisitRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn tiny_dataset() -> VisitDataset {
    load_dataset(
        &fixture("tiny.visits.jsonl"),
        &fixture("tiny.vocabulary.txt"),
    )
    .unwrap()
}

pub fn code(s: &str) -> ConceptCode {
    ConceptCode::new(s)
}

pub fn codes<I, S>(items: I) -> BTreeSet<ConceptCode>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    items
        .into_iter()
        .map(|s| ConceptCode::new(s.as_ref()))
        .collect()
}

pub fn visit(id: &str, on: &[&str], phenotypes: &[&str]) -> VisitRecord {
    VisitRecord {
        visit_id: VisitId::new(id),
        patient_id: format!("P-{id}"),
        codes: codes(on),
        phenotypes: phenotypes.iter().map(|p| p.to_string()).collect(),
        features: vec![0.0, 1.0],
        labels: BTreeMap::from([("task".to_owned(), 0)]),
        duration_hours: 72.0,
    }
}

pub fn vocab(names: &[&str]) -> PhenotypeVocabulary {
    PhenotypeVocabulary::new(names.iter().copied()).unwrap()
}

/// Node names used by the random graph helpers: `n000`, `n001`, ...
pub fn node_name(i: usize) -> String {
    format!("n{i:03}")
}

/// Random DAG on `n` nodes: every edge points from a lower to a higher
/// index, each pair joined with probability `p`.
pub fn random_dag(n: usize, p: f64, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn named_edges(edges: &[(usize, usize)]) -> Vec<(ConceptCode, ConceptCode)> {
    edges
        .iter()
        .map(|&(a, b)| {
            (
                ConceptCode::new(node_name(a)),
                ConceptCode::new(node_name(b)),
            )
        })
        .collect()
}

/// One visit per node so every node survives ancestor retention.
pub fn one_visit_per_node(n: usize) -> VisitDataset {
    let v = vocab(&["p1"]);
    let visits = (0..n).map(|i| visit(&format!("v{i:03}"), &[&node_name(i)], &["p1"]));
    VisitDataset::new(v, visits).unwrap()
}

/// Plain breadth-first reachability over an adjacency map.
pub fn bfs(adj: &BTreeMap<usize, Vec<usize>>, start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(&u).into_iter().flatten() {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen.remove(&start);
    seen
}

pub fn adjacency(edges: &[(usize, usize)], reverse: bool) -> BTreeMap<usize, Vec<usize>> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in edges {
        let (from, to) = if reverse { (b, a) } else { (a, b) };
        adj.entry(from).or_default().push(to);
    }
    adj
}
