//! JSON bodies returned to the UI. Every builder here is a pure function of
//! a [`Session`] snapshot, so equal state serializes to equal bytes.

use std::collections::BTreeMap;

use ontocohort::filter::summarize;
use ontocohort::{
    kl_matrix, AugmentSpec, ConceptCode, ConceptNode, FilterSpec, Origin, PhenotypeDistribution,
    ProvenanceEntry, SummaryStats, DEFAULT_SMOOTHING,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::session::{HistoryEntry, Session};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Loaded,
    Filtered,
    Augmented,
}

/// Seeds get a thick border, their descendants a thin one, sampled nodes
/// none; nodes outside the augmented set keep the default styling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderStyle {
    Thick,
    Thin,
    None,
    Default,
}

impl From<Origin> for BorderStyle {
    fn from(origin: Origin) -> Self {
        match origin {
            Origin::Seed => Self::Thick,
            Origin::SeedDescendant => Self::Thin,
            Origin::Sampled | Origin::SampledDescendant => Self::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: Option<String>,
    pub stage: Stage,
    pub node_count: usize,
    pub edge_count: usize,
    pub visit_count: usize,
    /// Ontology codes dropped because neither they nor a descendant carry visits.
    pub pruned_codes: usize,
    pub build_warnings: Vec<String>,
    pub filter: Option<FilterSpec>,
    pub augment: Option<AugmentSpec>,
    pub history_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderNode {
    pub code: ConceptCode,
    pub label: String,
    pub visit_count: usize,
    /// Depth in the loaded ontology, so general concepts stay large after filtering.
    pub depth: usize,
    pub border_style: BorderStyle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderEdge {
    pub parent: ConceptCode,
    pub child: ConceptCode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentInfo {
    pub spec: AugmentSpec,
    pub hops_completed: u32,
    pub stopped_early_at: Option<u32>,
    pub rng_algorithm: String,
    pub provenance: Vec<ProvenanceEntry>,
}

/// Graph view plus the bar (`summary.node_visit_counts`) and pie
/// (`summary.phenotype_shares`) series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderPayload {
    pub session_id: Option<String>,
    pub stage: Stage,
    pub nodes: Vec<RenderNode>,
    pub edges: Vec<RenderEdge>,
    pub summary: SummaryStats,
    /// Visits attached to the highlighted nodes: the whole filtered graph
    /// before augmentation, the augmented node set after.
    pub cohort_size: usize,
    pub warnings: Vec<String>,
    pub augment: Option<AugmentInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDetail {
    pub session_id: Option<String>,
    pub code: ConceptCode,
    pub label: String,
    pub visit_count: usize,
    pub depth: usize,
    pub phenotypes: Vec<String>,
    pub phenotype_counts: Vec<u64>,
    pub phenotype_dist: PhenotypeDistribution,
    /// KL(this node || seed) per currently selected seed; `null` when infinite.
    pub kl_to_selected: BTreeMap<ConceptCode, Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryPayload {
    pub session_id: Option<String>,
    pub entries: Vec<HistoryEntry>,
}

fn stage(s: &Session) -> Stage {
    if s.augmented.is_some() {
        Stage::Augmented
    } else if s.filtered.is_some() {
        Stage::Filtered
    } else {
        Stage::Loaded
    }
}

fn label_of(node: &ConceptNode) -> String {
    if node.label.is_empty() {
        node.code.to_string()
    } else {
        node.label.clone()
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn summary(s: &Session) -> SessionSummary {
    SessionSummary {
        session_id: None,
        stage: stage(s),
        node_count: s.base.len(),
        edge_count: s.base.edge_count(),
        visit_count: s.dataset.len(),
        pruned_codes: s.build.pruned_codes,
        build_warnings: s.build.warnings(),
        filter: s.filter_spec.clone(),
        augment: s.augmented.as_ref().map(|r| r.spec_echo.clone()),
        history_len: s.history.len(),
    }
}

pub fn render(s: &Session) -> Result<RenderPayload, ApiError> {
    let fg = s.filtered.as_ref().ok_or_else(ApiError::no_filter)?;
    let depth_of = |code: &ConceptCode| s.base.node(code).map_or(0, |n| n.depth);
    let nodes = fg
        .graph
        .nodes()
        .map(|n| RenderNode {
            code: n.code.clone(),
            label: label_of(n),
            visit_count: n.visit_count(),
            depth: depth_of(&n.code),
            border_style: s
                .augmented
                .as_ref()
                .and_then(|r| r.provenance.get(&n.code))
                .map_or(BorderStyle::Default, |p| p.origin.into()),
        })
        .collect();
    let edges = fg
        .graph
        .edges()
        .map(|(p, c)| RenderEdge {
            parent: p.clone(),
            child: c.clone(),
        })
        .collect();
    let (summary, cohort_size, augment) = match &s.augmented {
        Some(result) => {
            let view = fg.graph.induced_subgraph(&result.node_set);
            let info = AugmentInfo {
                spec: result.spec_echo.clone(),
                hops_completed: result.hops_completed,
                stopped_early_at: result.stopped_early_at,
                rng_algorithm: result.rng_algorithm.clone(),
                provenance: result.provenance_entries(),
            };
            (
                summarize(&view, &s.dataset),
                result.cohort_visit_ids.len(),
                Some(info),
            )
        }
        None => {
            let stats = summarize(&fg.graph, &s.dataset);
            let size = stats.total_visits;
            (stats, size, None)
        }
    };
    Ok(RenderPayload {
        session_id: None,
        stage: stage(s),
        nodes,
        edges,
        summary,
        cohort_size,
        warnings: fg.warnings.clone(),
        augment,
    })
}

pub fn node_detail(s: &Session, code: &ConceptCode) -> Result<NodeDetail, ApiError> {
    let fg = s.filtered.as_ref().ok_or_else(ApiError::no_filter)?;
    let node = fg.graph.node(code).ok_or_else(|| {
        ApiError::new(
            axum::http::StatusCode::NOT_FOUND,
            "UnknownNode",
            format!("`{code}` is not in the filtered graph"),
        )
        .with_detail(code.as_str())
    })?;
    let (selected, smoothing) = match (&s.augmented, &s.filter_spec) {
        (Some(r), _) => (r.spec_echo.seed_codes.clone(), r.spec_echo.smoothing),
        (None, Some(spec)) => (spec.selected_codes.clone(), DEFAULT_SMOOTHING),
        (None, None) => return Err(ApiError::no_filter()),
    };
    let mut codes = vec![code.clone()];
    codes.extend(selected.iter().filter(|c| fg.graph.contains(c)).cloned());
    let m = kl_matrix(fg, &codes, smoothing)?;
    let kl_to_selected = codes
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| (c.clone(), finite(m[0][j])))
        .chain(selected.contains(code).then(|| (code.clone(), Some(0.0))))
        .collect();
    Ok(NodeDetail {
        session_id: None,
        code: node.code.clone(),
        label: label_of(node),
        visit_count: node.visit_count(),
        depth: s.base.node(code).map_or(node.depth, |n| n.depth),
        phenotypes: s.dataset.vocabulary().names().to_vec(),
        phenotype_counts: node.phenotype_counts.clone(),
        phenotype_dist: node.phenotype_dist.clone(),
        kl_to_selected,
    })
}

pub fn history(s: &Session) -> HistoryPayload {
    HistoryPayload {
        session_id: None,
        entries: s.history.clone(),
    }
}
