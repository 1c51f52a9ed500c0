use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use ontocohort::augment::threshold_serde;
use ontocohort::cohort::{
    export_cohort, load_dataset, load_edges, load_labels, DataDir, ExportedFiles,
};
use ontocohort::{
    augment, build_graph, filter, AugmentResult, AugmentSpec, BuildReport, CohortManifest,
    ConceptCode, ConceptGraph, FilterSpec, FilteredGraph, VisitDataset, DEFAULT_SMOOTHING,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ApiError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadRequest {
    pub ontology_path: PathBuf,
    pub visits_path: PathBuf,
    pub vocabulary_path: PathBuf,
    #[serde(default)]
    pub labels_path: Option<PathBuf>,
}

/// Accepts the short field names used by the UI as well as the
/// `FilterSpec` names. Omitted phenotypes mean the whole vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRequest {
    #[serde(alias = "selected_codes")]
    pub codes: BTreeSet<ConceptCode>,
    #[serde(default, alias = "phenotypes_of_interest")]
    pub phenotypes: Option<BTreeSet<String>>,
    #[serde(default)]
    pub min_visits: u64,
    #[serde(default)]
    pub min_phenotype_count: u64,
}

/// Seeds default to the codes selected by the active filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentRequest {
    pub hops: u32,
    #[serde(with = "threshold_serde")]
    pub kl_threshold: f64,
    pub sampling_rate: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub seed_codes: Option<BTreeSet<ConceptCode>>,
    #[serde(default)]
    pub smoothing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaveRequest {
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub timestamp_unix_ms: u128,
    pub action: String,
    pub parameters: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaveResponse {
    pub visits_path: PathBuf,
    pub vocabulary_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: CohortManifest,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Immutable snapshot of the single analysis session. Every mutation
/// produces a new value; readers keep whichever snapshot they grabbed.
#[derive(Clone, Debug)]
pub struct Session {
    pub base: Arc<ConceptGraph>,
    pub dataset: Arc<VisitDataset>,
    pub build: BuildReport,
    pub filter_spec: Option<FilterSpec>,
    pub filtered: Option<Arc<FilteredGraph>>,
    pub augmented: Option<Arc<AugmentResult>>,
    pub history: Vec<HistoryEntry>,
}

impl Session {
    pub fn load(req: &LoadRequest) -> Result<Self, ApiError> {
        let edges = load_edges(&req.ontology_path)?;
        let dataset = load_dataset(&req.visits_path, &req.vocabulary_path)?;
        let labels = match &req.labels_path {
            Some(p) => load_labels(p)?,
            None => BTreeMap::new(),
        };
        let parameters = serde_json::to_value(req).unwrap_or(Value::Null);
        Self::from_parts(
            DataDir {
                edges,
                labels,
                dataset,
            },
            parameters,
        )
    }

    pub fn from_data_dir(data: DataDir) -> Result<Self, ApiError> {
        Self::from_parts(data, Value::Null)
    }

    fn from_parts(data: DataDir, parameters: Value) -> Result<Self, ApiError> {
        let (mut graph, build) = build_graph(&data.edges, &data.dataset)?;
        graph.apply_labels(&data.labels);
        Ok(Self {
            base: Arc::new(graph),
            dataset: Arc::new(data.dataset),
            build,
            filter_spec: None,
            filtered: None,
            augmented: None,
            history: vec![HistoryEntry {
                timestamp_unix_ms: now_ms(),
                action: "load".to_owned(),
                parameters,
            }],
        })
    }

    fn record(&mut self, action: &str, parameters: &impl Serialize) {
        self.history.push(HistoryEntry {
            timestamp_unix_ms: now_ms(),
            action: action.to_owned(),
            parameters: serde_json::to_value(parameters).unwrap_or(Value::Null),
        });
    }

    pub fn filter_spec_for(&self, req: &FilterRequest) -> FilterSpec {
        FilterSpec {
            selected_codes: req.codes.clone(),
            phenotypes_of_interest: req
                .phenotypes
                .clone()
                .unwrap_or_else(|| self.dataset.vocabulary().names().iter().cloned().collect()),
            min_visits: req.min_visits,
            min_phenotype_count: req.min_phenotype_count,
        }
    }

    /// Replaces any previous filter and drops the augmentation built on it.
    pub fn apply_filter(&self, req: &FilterRequest) -> Result<Self, ApiError> {
        let spec = self.filter_spec_for(req);
        let fg = filter(&self.base, &spec)?;
        let mut next = self.clone();
        next.record("filter", &spec);
        next.filter_spec = Some(spec);
        next.filtered = Some(Arc::new(fg));
        next.augmented = None;
        Ok(next)
    }

    pub fn augment_spec_for(&self, req: &AugmentRequest) -> Result<AugmentSpec, ApiError> {
        let filter_spec = self.filter_spec.as_ref().ok_or_else(ApiError::no_filter)?;
        Ok(AugmentSpec {
            seed_codes: req
                .seed_codes
                .clone()
                .unwrap_or_else(|| filter_spec.selected_codes.clone()),
            hops: req.hops,
            kl_threshold: req.kl_threshold,
            sampling_rate: req.sampling_rate,
            rng_seed: req.rng_seed,
            smoothing: req.smoothing.unwrap_or(DEFAULT_SMOOTHING),
        })
    }

    pub fn apply_augment(&self, req: &AugmentRequest) -> Result<Self, ApiError> {
        let fg = self.filtered.as_ref().ok_or_else(ApiError::no_filter)?;
        let spec = self.augment_spec_for(req)?;
        let result = augment(fg, &spec)?;
        let mut next = self.clone();
        next.record("augment", &spec);
        next.augmented = Some(Arc::new(result));
        Ok(next)
    }

    /// Exports the augmented cohort, or every visit of the filtered graph
    /// when no augmentation has run yet.
    pub fn save(&self, req: &SaveRequest) -> Result<(Self, SaveResponse), ApiError> {
        let filter_spec = self.filter_spec.as_ref();
        let (ids, manifest) = match (&self.augmented, &self.filtered, filter_spec) {
            (Some(result), _, _) => (
                result.cohort_visit_ids.clone(),
                CohortManifest::for_augmentation(filter_spec, result, Some(now_ms())),
            ),
            (None, Some(fg), Some(spec)) => {
                let ids = fg.graph.all_visits();
                let manifest = CohortManifest::for_filter(spec, ids.len(), Some(now_ms()));
                (ids, manifest)
            }
            _ => {
                return Err(ApiError::new(
                    axum::http::StatusCode::CONFLICT,
                    "NothingToSave",
                    "filter or augment before saving",
                ))
            }
        };
        let visits = self.dataset.select(&ids);
        let ExportedFiles {
            visits: visits_path,
            vocabulary: vocabulary_path,
            manifest: manifest_path,
        } = export_cohort(
            visits.iter().copied(),
            self.dataset.vocabulary(),
            &manifest,
            &req.path,
        )?;
        let mut next = self.clone();
        next.record("save", req);
        Ok((
            next,
            SaveResponse {
                visits_path,
                vocabulary_path,
                manifest_path,
                manifest,
            },
        ))
    }

    /// Back to the freshly loaded graph; history is kept.
    pub fn reset(&self) -> Self {
        let mut next = self.clone();
        next.record("reset", &Value::Null);
        next.filter_spec = None;
        next.filtered = None;
        next.augmented = None;
        next
    }
}
