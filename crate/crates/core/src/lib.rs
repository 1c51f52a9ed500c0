//! Ontology-guided cohort augmentation.
//!
//! A small seed cohort of visits, identified by concept codes, is grown by
//! walking a concept DAG: parents of the current frontier are proposed,
//! gated by KL divergence between phenotype distributions, and accepted by
//! seeded Monte-Carlo sampling. The crate also carries the data plumbing
//! (loading, synthetic generation, export) and a logistic-regression
//! evaluation harness for comparing cohorts.

pub mod augment;
pub mod cohort;
pub mod eval;
pub mod filter;
pub mod graph;
pub mod ids;
pub mod manifest;
pub mod rng;

pub use augment::{
    augment, candidate_parents, kl_divergence, kl_matrix, mc_sample, score_candidates,
    AugmentError, AugmentResult, AugmentSpec, FrontierMap, Origin, Provenance, ProvenanceEntry,
    DEFAULT_SMOOTHING,
};
pub use cohort::{
    phenotype_distribution, DataError, PhenotypeDistribution, PhenotypeVocabulary, VisitDataset,
    VisitRecord,
};
pub use eval::{EvalError, EvalReport, LrConfig, TaskSpec};
pub use filter::{filter, filter_summary, FilterError, FilterSpec, FilteredGraph, SummaryStats};
pub use graph::{build_graph, BuildReport, ConceptGraph, ConceptNode, GraphError};
pub use ids::{ConceptCode, VisitId};
pub use manifest::CohortManifest;

use thiserror::Error;

/// Any error raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
