//! Visit-level observational data and per-concept phenotype distributions.

mod distribution;
mod io;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ConceptCode, VisitId};

pub use distribution::{phenotype_distribution, PhenotypeDistribution};
pub use io::{
    export_cohort, load_data_dir, load_dataset, load_edges, load_labels, load_vocabulary,
    read_visits, write_edges, write_labels, write_visits, write_vocabulary, DataDir, ExportedFiles,
    EDGES_FILE, LABELS_FILE, MANIFEST_FILE, VISITS_FILE, VOCABULARY_FILE,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate visit id `{0}`")]
    DuplicateVisitId(VisitId),
    #[error("visit `{visit}` carries unknown phenotype `{phenotype}`")]
    UnknownPhenotype { visit: VisitId, phenotype: String },
    #[error("visit `{visit}` has {found} features, expected {expected}")]
    FeatureDimMismatch {
        visit: VisitId,
        expected: usize,
        found: usize,
    },
    #[error("visit `{visit}` label `{task}` must be 0 or 1, got {value}")]
    InvalidLabel {
        visit: VisitId,
        task: String,
        value: u8,
    },
    #[error("visit `{0}` has a negative or non-finite duration")]
    InvalidDuration(VisitId),
    #[error("invalid phenotype vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The fixed, ordered set of phenotype names every distribution is aligned to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhenotypeVocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl PhenotypeVocabulary {
    pub fn new<I, S>(names: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DataError::InvalidVocabulary("vocabulary is empty".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(DataError::InvalidVocabulary(format!("entry {i} is empty")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(DataError::InvalidVocabulary(format!(
                    "duplicate phenotype `{name}`"
                )));
            }
        }
        Ok(Self { names, index })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

/// One visit (admission). Field names match the JSON Lines schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub visit_id: VisitId,
    pub patient_id: String,
    pub codes: BTreeSet<ConceptCode>,
    pub phenotypes: BTreeSet<String>,
    pub features: Vec<f64>,
    pub labels: BTreeMap<String, u8>,
    pub duration_hours: f64,
}

impl VisitRecord {
    pub fn label(&self, task: &str) -> Option<u8> {
        self.labels.get(task).copied()
    }
}

/// Validated collection of visits sharing one vocabulary and feature layout.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitDataset {
    visits: BTreeMap<VisitId, VisitRecord>,
    vocabulary: PhenotypeVocabulary,
    feature_dim: usize,
    feature_names: Vec<String>,
}

impl VisitDataset {
    /// Validates and indexes `visits`. The feature dimension is taken from
    /// the first visit; an empty dataset has dimension zero.
    pub fn new(
        vocabulary: PhenotypeVocabulary,
        visits: impl IntoIterator<Item = VisitRecord>,
    ) -> Result<Self, DataError> {
        let mut map = BTreeMap::new();
        let mut feature_dim = None;
        for visit in visits {
            validate_visit(&visit, &vocabulary, &mut feature_dim)?;
            if map.contains_key(&visit.visit_id) {
                return Err(DataError::DuplicateVisitId(visit.visit_id));
            }
            map.insert(visit.visit_id.clone(), visit);
        }
        let feature_dim = feature_dim.unwrap_or(0);
        Ok(Self {
            visits: map,
            vocabulary,
            feature_dim,
            feature_names: (0..feature_dim).map(|i| format!("feature_{i}")).collect(),
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, DataError> {
        if names.len() != self.feature_dim {
            return Err(DataError::InvalidConfig(format!(
                "{} feature names for dimension {}",
                names.len(),
                self.feature_dim
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn vocabulary(&self) -> &PhenotypeVocabulary {
        &self.vocabulary
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn get(&self, id: &VisitId) -> Option<&VisitRecord> {
        self.visits.get(id)
    }

    pub fn contains(&self, id: &VisitId) -> bool {
        self.visits.contains_key(id)
    }

    /// Visits in ascending id order.
    pub fn visits(&self) -> impl Iterator<Item = &VisitRecord> {
        self.visits.values()
    }

    /// Looks up every id in `ids`, skipping ids not in the dataset.
    pub fn select<'a, I>(&'a self, ids: I) -> Vec<&'a VisitRecord>
    where
        I: IntoIterator<Item = &'a VisitId>,
    {
        ids.into_iter()
            .filter_map(|id| self.visits.get(id))
            .collect()
    }
}

fn validate_visit(
    visit: &VisitRecord,
    vocabulary: &PhenotypeVocabulary,
    feature_dim: &mut Option<usize>,
) -> Result<(), DataError> {
    if let Some(unknown) = visit.phenotypes.iter().find(|p| !vocabulary.contains(p)) {
        return Err(DataError::UnknownPhenotype {
            visit: visit.visit_id.clone(),
            phenotype: unknown.clone(),
        });
    }
    let expected = *feature_dim.get_or_insert(visit.features.len());
    if visit.features.len() != expected {
        return Err(DataError::FeatureDimMismatch {
            visit: visit.visit_id.clone(),
            expected,
            found: visit.features.len(),
        });
    }
    if let Some((task, &value)) = visit.labels.iter().find(|(_, &v)| v > 1) {
        return Err(DataError::InvalidLabel {
            visit: visit.visit_id.clone(),
            task: task.clone(),
            value,
        });
    }
    if !(visit.duration_hours.is_finite() && visit.duration_hours >= 0.0) {
        return Err(DataError::InvalidDuration(visit.visit_id.clone()));
    }
    Ok(())
}
