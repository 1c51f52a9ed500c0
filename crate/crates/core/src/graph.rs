//! Concept DAG restricted to the codes carried by a visit dataset.
//!
//! Nodes are stored densely in ascending code order, so index order and code
//! order coincide and every traversal result comes out sorted.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::cohort::{PhenotypeDistribution, PhenotypeVocabulary, VisitDataset};
use crate::ids::{ConceptCode, VisitId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("ontology edges contain a directed cycle through `{0}`")]
    CycleDetected(ConceptCode),
    #[error("unknown concept code `{0}`")]
    UnknownCode(ConceptCode),
}

/// One concept with its attached visits and phenotype bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConceptNode {
    pub code: ConceptCode,
    pub label: String,
    pub visit_ids: BTreeSet<VisitId>,
    /// Per phenotype, the number of attached visits carrying it.
    pub phenotype_counts: Vec<u64>,
    pub phenotype_dist: PhenotypeDistribution,
    /// Longest path from a root of the graph the node was built in.
    pub depth: usize,
}

impl ConceptNode {
    pub fn visit_count(&self) -> usize {
        self.visit_ids.len()
    }
}

/// Problems tolerated while building a graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub duplicate_edges: usize,
    /// Visit code references not present in the ontology; dropped.
    pub unknown_visit_codes: usize,
    /// Ontology codes dropped because no visit reaches them.
    pub pruned_codes: usize,
}

impl BuildReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.duplicate_edges > 0 {
            out.push(format!("{} duplicate edges ignored", self.duplicate_edges));
        }
        if self.unknown_visit_codes > 0 {
            out.push(format!(
                "{} visit code references not in the ontology were dropped",
                self.unknown_visit_codes
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConceptGraph {
    nodes: Vec<ConceptNode>,
    index: HashMap<ConceptCode, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    vocabulary: PhenotypeVocabulary,
}

/// Builds the concept graph for `dataset` from an is-a edge list.
///
/// Kept codes are those carried by at least one visit plus all of their
/// ancestors; edges are induced on that set.
pub fn build_graph(
    edges: &[(ConceptCode, ConceptCode)],
    dataset: &VisitDataset,
) -> Result<(ConceptGraph, BuildReport), GraphError> {
    let mut report = BuildReport::default();

    let mut unique: BTreeSet<(&ConceptCode, &ConceptCode)> = BTreeSet::new();
    for (parent, child) in edges {
        if parent == child {
            return Err(GraphError::CycleDetected(parent.clone()));
        }
        if !unique.insert((parent, child)) {
            report.duplicate_edges += 1;
        }
    }

    let universe: BTreeSet<&ConceptCode> = unique.iter().flat_map(|&(p, c)| [p, c]).collect();
    let universe: Vec<&ConceptCode> = universe.into_iter().collect();
    let uidx: HashMap<&ConceptCode, usize> =
        universe.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut up: Vec<Vec<usize>> = vec![Vec::new(); universe.len()];
    let mut down: Vec<Vec<usize>> = vec![Vec::new(); universe.len()];
    for &(p, c) in &unique {
        up[uidx[c]].push(uidx[p]);
        down[uidx[p]].push(uidx[c]);
    }
    if let Some(i) = find_cycle(&down) {
        return Err(GraphError::CycleDetected(universe[i].clone()));
    }

    let mut carried = vec![false; universe.len()];
    let mut attached: Vec<Vec<&VisitId>> = vec![Vec::new(); universe.len()];
    for visit in dataset.visits() {
        for code in &visit.codes {
            match uidx.get(code) {
                Some(&i) => {
                    carried[i] = true;
                    attached[i].push(&visit.visit_id);
                }
                None => report.unknown_visit_codes += 1,
            }
        }
    }

    // Carried codes and everything above them.
    let mut keep = carried.clone();
    let mut stack: Vec<usize> = (0..universe.len()).filter(|&i| carried[i]).collect();
    while let Some(i) = stack.pop() {
        for &p in &up[i] {
            if !keep[p] {
                keep[p] = true;
                stack.push(p);
            }
        }
    }
    report.pruned_codes = keep.iter().filter(|&&k| !k).count();

    let vocabulary = dataset.vocabulary().clone();
    let mut remap = vec![usize::MAX; universe.len()];
    let mut nodes = Vec::new();
    for (i, &code) in universe.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        remap[i] = nodes.len();
        let visit_ids: BTreeSet<VisitId> = attached[i].iter().map(|&v| v.clone()).collect();
        let mut counts = vec![0u64; vocabulary.len()];
        for id in &visit_ids {
            let visit = dataset.get(id).expect("attached visit exists");
            for phenotype in &visit.phenotypes {
                if let Some(k) = vocabulary.position(phenotype) {
                    counts[k] += 1;
                }
            }
        }
        let phenotype_dist = if visit_ids.is_empty() {
            PhenotypeDistribution::empty(vocabulary.len())
        } else {
            PhenotypeDistribution::from_counts(&counts, visit_ids.len())
        };
        nodes.push(ConceptNode {
            code: code.clone(),
            label: String::new(),
            visit_ids,
            phenotype_counts: counts,
            phenotype_dist,
            depth: 0,
        });
    }

    let mut parents = vec![Vec::new(); nodes.len()];
    let mut children = vec![Vec::new(); nodes.len()];
    for (i, kids) in down.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        for &k in kids {
            if keep[k] {
                children[remap[i]].push(remap[k]);
                parents[remap[k]].push(remap[i]);
            }
        }
    }
    let graph = ConceptGraph::assemble(nodes, parents, children, vocabulary, true);
    Ok((graph, report))
}

/// Returns some node on a directed cycle, if any (Kahn's algorithm).
fn find_cycle(children: &[Vec<usize>]) -> Option<usize> {
    let mut indegree = vec![0usize; children.len()];
    for kids in children {
        for &k in kids {
            indegree[k] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..children.len()).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = queue.pop() {
        seen += 1;
        for &k in &children[i] {
            indegree[k] -= 1;
            if indegree[k] == 0 {
                queue.push(k);
            }
        }
    }
    if seen == children.len() {
        None
    } else {
        indegree.iter().position(|&d| d > 0)
    }
}

impl ConceptGraph {
    fn assemble(
        nodes: Vec<ConceptNode>,
        mut parents: Vec<Vec<usize>>,
        mut children: Vec<Vec<usize>>,
        vocabulary: PhenotypeVocabulary,
        compute_depth: bool,
    ) -> Self {
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.code.clone(), i))
            .collect();
        let mut graph = Self {
            nodes,
            index,
            parents,
            children,
            vocabulary,
        };
        if compute_depth {
            let depths = graph.longest_root_paths();
            for (node, depth) in graph.nodes.iter_mut().zip(depths) {
                node.depth = depth;
            }
        }
        graph
    }

    fn longest_root_paths(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut pending: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut depth = vec![0usize; n];
        let mut queue: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
        while let Some(i) = queue.pop() {
            for &k in &self.children[i] {
                depth[k] = depth[k].max(depth[i] + 1);
                pending[k] -= 1;
                if pending[k] == 0 {
                    queue.push(k);
                }
            }
        }
        depth
    }

    /// Attaches human-readable labels; codes absent from the graph are ignored.
    pub fn apply_labels(&mut self, labels: &BTreeMap<ConceptCode, String>) {
        for node in &mut self.nodes {
            if let Some(label) = labels.get(&node.code) {
                node.label = label.clone();
            }
        }
    }

    pub fn vocabulary(&self) -> &PhenotypeVocabulary {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, code: &ConceptCode) -> bool {
        self.index.contains_key(code)
    }

    pub fn node(&self, code: &ConceptCode) -> Option<&ConceptNode> {
        self.index.get(code).map(|&i| &self.nodes[i])
    }

    /// Nodes in ascending code order.
    pub fn nodes(&self) -> impl Iterator<Item = &ConceptNode> {
        self.nodes.iter()
    }

    pub fn codes(&self) -> impl Iterator<Item = &ConceptCode> {
        self.nodes.iter().map(|n| &n.code)
    }

    /// `(parent, child)` pairs sorted by parent then child.
    pub fn edges(&self) -> impl Iterator<Item = (&ConceptCode, &ConceptCode)> {
        self.children.iter().enumerate().flat_map(move |(p, kids)| {
            kids.iter()
                .map(move |&c| (&self.nodes[p].code, &self.nodes[c].code))
        })
    }

    pub(crate) fn idx(&self, code: &ConceptCode) -> Result<usize, GraphError> {
        self.index
            .get(code)
            .copied()
            .ok_or_else(|| GraphError::UnknownCode(code.clone()))
    }

    pub(crate) fn node_at(&self, i: usize) -> &ConceptNode {
        &self.nodes[i]
    }

    pub(crate) fn parent_indices(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn child_lists(&self) -> &[Vec<usize>] {
        &self.children
    }

    fn codes_of(&self, indices: impl IntoIterator<Item = usize>) -> BTreeSet<ConceptCode> {
        indices
            .into_iter()
            .map(|i| self.nodes[i].code.clone())
            .collect()
    }

    pub fn parents(&self, code: &ConceptCode) -> Result<BTreeSet<ConceptCode>, GraphError> {
        let i = self.idx(code)?;
        Ok(self.codes_of(self.parents[i].iter().copied()))
    }

    pub fn children(&self, code: &ConceptCode) -> Result<BTreeSet<ConceptCode>, GraphError> {
        let i = self.idx(code)?;
        Ok(self.codes_of(self.children[i].iter().copied()))
    }

    /// Transitive closure of children, excluding `code` itself.
    pub fn descendants(&self, code: &ConceptCode) -> Result<BTreeSet<ConceptCode>, GraphError> {
        let i = self.idx(code)?;
        Ok(self.codes_of(self.reach(&[i], &self.children)))
    }

    /// Transitive closure of parents, excluding `code` itself.
    pub fn ancestors(&self, code: &ConceptCode) -> Result<BTreeSet<ConceptCode>, GraphError> {
        let i = self.idx(code)?;
        Ok(self.codes_of(self.reach(&[i], &self.parents)))
    }

    /// Sorted indices reachable from `starts` along `adjacency`, starts excluded
    /// unless reachable from another start.
    pub(crate) fn reach(&self, starts: &[usize], adjacency: &[Vec<usize>]) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = Vec::new();
        for &s in starts {
            stack.extend(adjacency[s].iter().copied());
        }
        let mut out = Vec::new();
        while let Some(i) = stack.pop() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            out.push(i);
            stack.extend(adjacency[i].iter().copied().filter(|&k| !seen[k]));
        }
        out.sort_unstable();
        out
    }

    pub(crate) fn descendant_indices(&self, i: usize) -> Vec<usize> {
        self.reach(&[i], &self.children)
    }

    /// Components of the graph with edge direction ignored, each sorted, in
    /// order of their smallest code.
    pub fn weakly_connected_components(&self) -> Vec<BTreeSet<ConceptCode>> {
        self.component_indices()
            .into_iter()
            .map(|c| self.codes_of(c))
            .collect()
    }

    pub(crate) fn component_indices(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut component = vec![start];
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                for &k in self.parents[i].iter().chain(&self.children[i]) {
                    if !seen[k] {
                        seen[k] = true;
                        component.push(k);
                        queue.push_back(k);
                    }
                }
            }
            component.sort_unstable();
            components.push(component);
        }
        components
    }

    /// Subgraph induced on `keep`. Node data (visits, distributions, depth)
    /// is carried over unchanged.
    pub fn induced_subgraph(&self, keep: &BTreeSet<ConceptCode>) -> ConceptGraph {
        let indices: Vec<usize> = keep
            .iter()
            .filter_map(|c| self.index.get(c).copied())
            .collect();
        self.induced_by_indices(&indices)
    }

    pub(crate) fn induced_by_indices(&self, indices: &[usize]) -> ConceptGraph {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let remap: HashMap<usize, usize> = sorted
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let nodes = sorted.iter().map(|&i| self.nodes[i].clone()).collect();
        let mut parents = vec![Vec::new(); sorted.len()];
        let mut children = vec![Vec::new(); sorted.len()];
        for (new, &old) in sorted.iter().enumerate() {
            for &k in &self.children[old] {
                if let Some(&nk) = remap.get(&k) {
                    children[new].push(nk);
                    parents[nk].push(new);
                }
            }
        }
        ConceptGraph::assemble(nodes, parents, children, self.vocabulary.clone(), false)
    }

    /// Distinct visit ids attached to any of `codes`.
    pub fn visits_of<'a, I>(&self, codes: I) -> BTreeSet<VisitId>
    where
        I: IntoIterator<Item = &'a ConceptCode>,
    {
        let mut out = BTreeSet::new();
        for code in codes {
            if let Some(node) = self.node(code) {
                out.extend(node.visit_ids.iter().cloned());
            }
        }
        out
    }

    /// Distinct visit ids attached anywhere in the graph.
    pub fn all_visits(&self) -> BTreeSet<VisitId> {
        let mut out = BTreeSet::new();
        let mut seen: HashSet<&VisitId> = HashSet::new();
        for node in &self.nodes {
            for id in &node.visit_ids {
                if seen.insert(id) {
                    out.insert(id.clone());
                }
            }
        }
        out
    }
}
