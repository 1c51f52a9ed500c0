//! Shared fixtures for the benchmarks.

use ontocohort::cohort::synth::{generate_synthetic, SynthConfig, SyntheticData};
use ontocohort::{build_graph, filter, ConceptGraph, FilterSpec, FilteredGraph};

pub struct Fixture {
    pub data: SyntheticData,
    pub graph: ConceptGraph,
    pub spec: FilterSpec,
    pub filtered: FilteredGraph,
}

/// Generated fixture with the zero-threshold filter already applied.
pub fn fixture(node_count: usize, visit_count: usize, seed: u64) -> Fixture {
    let data =
        generate_synthetic(&SynthConfig::new(node_count, visit_count), seed).expect("valid config");
    let (graph, _) = build_graph(&data.edges, &data.dataset).expect("generated graph is acyclic");
    let spec = FilterSpec {
        selected_codes: data.manifest.seed_codes.clone(),
        phenotypes_of_interest: data.manifest.signal_phenotypes.clone(),
        min_visits: 0,
        min_phenotype_count: 0,
    };
    let filtered = filter(&graph, &spec).expect("seeds exist");
    Fixture {
        data,
        graph,
        spec,
        filtered,
    }
}
