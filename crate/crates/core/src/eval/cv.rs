use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{auc, train_logistic, EvalError, LrConfig, Standardizer};
use crate::cohort::{VisitDataset, VisitRecord};
use crate::ids::VisitId;
use crate::rng;

/// A binary prediction task over visit labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub label_key: String,
    /// Visits shorter than this are excluded before evaluation.
    #[serde(default)]
    pub min_duration_hours: Option<f64>,
}

impl TaskSpec {
    pub fn is_usable(&self, visit: &VisitRecord) -> bool {
        visit.labels.contains_key(&self.label_key)
            && self
                .min_duration_hours
                .is_none_or(|min| visit.duration_hours >= min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cohort_name: String,
    pub task: String,
    pub visit_count: usize,
    pub positive_count: usize,
    pub negative_count: usize,
    pub auc_mean: f64,
    /// Population standard deviation over valid folds.
    pub auc_std: f64,
    /// One entry per fold; `None` for folds lacking a class in train or test.
    pub fold_aucs: Vec<Option<f64>>,
    pub seed: u64,
}

/// Assigns each visit to one of `k` folds, preserving class proportions.
///
/// `visits` are `(id, label)` pairs in ascending id order. Positives are
/// shuffled first, then negatives, with one generator keyed by `seed`;
/// positives are dealt round-robin from fold 0 and negatives continue the
/// deal where the positives stopped.
pub fn stratified_folds(visits: &[(VisitId, u8)], k: usize, seed: u64) -> Vec<Vec<VisitId>> {
    let mut positives: Vec<&VisitId> = visits.iter().filter(|v| v.1 == 1).map(|v| &v.0).collect();
    let mut negatives: Vec<&VisitId> = visits.iter().filter(|v| v.1 != 1).map(|v| &v.0).collect();
    let mut rng = rng::seeded(seed);
    rng::shuffle(&mut rng, &mut positives);
    rng::shuffle(&mut rng, &mut negatives);
    let mut folds = vec![Vec::new(); k];
    for (i, id) in positives.iter().chain(negatives.iter()).enumerate() {
        folds[i % k].push((*id).clone());
    }
    for fold in &mut folds {
        fold.sort();
    }
    folds
}

/// Stratified k-fold cross-validation of logistic regression on the visits
/// in `visit_ids` that are usable for `task`.
pub fn cross_validate(
    dataset: &VisitDataset,
    visit_ids: &BTreeSet<VisitId>,
    cohort_name: &str,
    task: &TaskSpec,
    k: usize,
    seed: u64,
    config: &LrConfig,
) -> Result<EvalReport, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    let usable: Vec<&VisitRecord> = dataset
        .select(visit_ids)
        .into_iter()
        .filter(|v| task.is_usable(v))
        .collect();
    if usable.len() < k {
        return Err(EvalError::TooFewVisits {
            usable: usable.len(),
            folds: k,
        });
    }
    let labelled: Vec<(VisitId, u8)> = usable
        .iter()
        .map(|v| (v.visit_id.clone(), v.labels[&task.label_key]))
        .collect();
    let positive_count = labelled.iter().filter(|v| v.1 == 1).count();
    let folds = stratified_folds(&labelled, k, seed);

    let mut fold_aucs = Vec::with_capacity(k);
    for test_fold in 0..k {
        let fold_auc = evaluate_fold(dataset, &folds, test_fold, &task.label_key, config);
        fold_aucs.push(fold_auc);
    }
    let valid: Vec<f64> = fold_aucs.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(EvalError::NoValidFolds);
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let var = valid.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / valid.len() as f64;
    Ok(EvalReport {
        cohort_name: cohort_name.to_owned(),
        task: task.name.clone(),
        visit_count: usable.len(),
        positive_count,
        negative_count: usable.len() - positive_count,
        auc_mean: mean,
        auc_std: var.sqrt(),
        fold_aucs,
        seed,
    })
}

fn evaluate_fold(
    dataset: &VisitDataset,
    folds: &[Vec<VisitId>],
    test_fold: usize,
    label_key: &str,
    config: &LrConfig,
) -> Option<f64> {
    let rows = |ids: &mut dyn Iterator<Item = &VisitId>| -> (Vec<Vec<f64>>, Vec<u8>) {
        ids.filter_map(|id| dataset.get(id))
            .map(|v| (v.features.clone(), v.labels[label_key]))
            .unzip()
    };
    let (train_x, train_y) = rows(
        &mut folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != test_fold)
            .flat_map(|(_, f)| f.iter()),
    );
    let (test_x, test_y) = rows(&mut folds[test_fold].iter());

    let scaler = Standardizer::fit(&train_x);
    let train_x: Vec<Vec<f64>> = train_x.iter().map(|r| scaler.transform(r)).collect();
    let model = train_logistic(&train_x, &train_y, config).ok()?;
    let scores: Vec<f64> = test_x
        .iter()
        .map(|r| model.decision(&scaler.transform(r)))
        .collect();
    auc(&scores, &test_y).ok()
}
