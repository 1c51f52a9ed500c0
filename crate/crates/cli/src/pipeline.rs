use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ontocohort::augment::threshold_serde;
use ontocohort::cohort::MANIFEST_FILE;
use ontocohort::eval::{
    build_baseline_cohorts, cross_validate, format_table, target_cohort, TableRow,
};
use ontocohort::{
    augment, build_graph, filter, AugmentResult, AugmentSpec, ConceptCode, FilterSpec, LrConfig,
    Origin, TaskSpec, DEFAULT_SMOOTHING,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{load_data, read_json, CliError};

/// Filter config file. Mirrors `FilterSpec`; seed codes and phenotypes may
/// be omitted when the data directory's manifest proposes them.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default)]
    pub selected_codes: Option<BTreeSet<ConceptCode>>,
    #[serde(default)]
    pub phenotypes_of_interest: Option<BTreeSet<String>>,
    pub min_visits: u64,
    pub min_phenotype_count: u64,
}

/// One augmentation run. Mirrors `AugmentSpec`; `seed_codes` defaults to
/// the filter's selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentEntry {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed_codes: Option<BTreeSet<ConceptCode>>,
    pub hops: u32,
    #[serde(with = "threshold_serde")]
    pub kl_threshold: f64,
    pub sampling_rate: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub smoothing: Option<f64>,
}

/// An augment config file holds a single entry or a list of entries.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig(pub Vec<AugmentEntry>);

impl AugmentConfig {
    pub fn from_value(value: Value) -> Result<Self, String> {
        let entries = match value {
            Value::Array(items) => items
                .into_iter()
                .map(serde_json::from_value)
                .collect::<Result<Vec<AugmentEntry>, _>>(),
            other => serde_json::from_value(other).map(|e| vec![e]),
        }
        .map_err(|e| e.to_string())?;
        if entries.is_empty() {
            return Err("augment config lists no runs".into());
        }
        Ok(Self(entries))
    }
}

/// The parts of a generator manifest the pipeline reads.
#[derive(Clone, Debug, Default, Deserialize)]
struct DataManifest {
    #[serde(default)]
    tasks: Vec<TaskSpec>,
    #[serde(default)]
    seed_codes: BTreeSet<ConceptCode>,
    #[serde(default)]
    signal_phenotypes: BTreeSet<String>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub data: PathBuf,
    pub filter: PathBuf,
    pub augment: PathBuf,
    pub task: String,
    pub folds: usize,
    pub cv_seed: u64,
    pub random_sizes: Vec<usize>,
    pub random_seed: u64,
    pub lr: LrConfig,
}

impl RunOptions {
    pub fn new(
        data: impl Into<PathBuf>,
        filter: impl Into<PathBuf>,
        augment: impl Into<PathBuf>,
        task: &str,
    ) -> Self {
        Self {
            data: data.into(),
            filter: filter.into(),
            augment: augment.into(),
            task: task.to_owned(),
            folds: 3,
            cv_seed: 0,
            random_sizes: vec![3000, 6000, 8000],
            random_seed: 0,
            lr: LrConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub name: String,
    pub spec: AugmentSpec,
    pub hops_completed: u32,
    pub stopped_early_at: Option<u32>,
    pub rng_algorithm: String,
    pub node_count: usize,
    pub sampled_nodes: usize,
    pub cohort_size: usize,
    pub nodes: BTreeSet<ConceptCode>,
}

/// Everything needed to rerun the comparison: inputs, seeds and results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub data: String,
    pub task: TaskSpec,
    pub filter: FilterSpec,
    pub folds: usize,
    pub cv_seed: u64,
    pub random_seed: u64,
    pub random_sizes: Vec<usize>,
    pub lr: LrConfig,
    pub filtered_nodes: usize,
    pub filtered_visits: usize,
    pub warnings: Vec<String>,
    pub augmentations: Vec<AugmentSummary>,
    pub rows: Vec<TableRow>,
}

impl RunReport {
    pub fn table(&self) -> String {
        format_table(
            &format!(
                "Comparison of augmentation strategies, task `{}`",
                self.task.name
            ),
            &self.rows,
        )
    }

    pub fn row(&self, name: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    /// Augmentation results in config order, keyed by run name.
    pub results: Vec<(String, AugmentResult)>,
}

fn data_manifest(dir: &Path) -> Result<DataManifest, CliError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(DataManifest::default());
    }
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn resolve_task(name: &str, manifest: &DataManifest) -> TaskSpec {
    manifest
        .tasks
        .iter()
        .find(|t| t.name == name)
        .cloned()
        .unwrap_or_else(|| TaskSpec {
            name: name.to_owned(),
            label_key: name.to_owned(),
            min_duration_hours: None,
        })
}

fn resolve_filter(config: FilterConfig, manifest: &DataManifest) -> Result<FilterSpec, CliError> {
    let selected_codes = match config.selected_codes {
        Some(codes) => codes,
        None if !manifest.seed_codes.is_empty() => manifest.seed_codes.clone(),
        None => {
            return Err(CliError::Config(
                "filter config needs selected_codes".into(),
            ))
        }
    };
    let phenotypes_of_interest = match config.phenotypes_of_interest {
        Some(p) => p,
        None if !manifest.signal_phenotypes.is_empty() => manifest.signal_phenotypes.clone(),
        None => {
            return Err(CliError::Config(
                "filter config needs phenotypes_of_interest".into(),
            ))
        }
    };
    Ok(FilterSpec {
        selected_codes,
        phenotypes_of_interest,
        min_visits: config.min_visits,
        min_phenotype_count: config.min_phenotype_count,
    })
}

pub fn augment_spec(entry: &AugmentEntry, filter: &FilterSpec) -> AugmentSpec {
    AugmentSpec {
        seed_codes: entry
            .seed_codes
            .clone()
            .unwrap_or_else(|| filter.selected_codes.clone()),
        hops: entry.hops,
        kl_threshold: entry.kl_threshold,
        sampling_rate: entry.sampling_rate,
        rng_seed: entry.rng_seed,
        smoothing: entry.smoothing.unwrap_or(DEFAULT_SMOOTHING),
    }
}

/// Loads, filters, augments and evaluates. Output depends only on the
/// inputs and seeds in `opts`.
pub fn run(opts: &RunOptions) -> Result<RunOutcome, CliError> {
    if opts.folds < 2 {
        return Err(CliError::Config(format!(
            "folds must be at least 2, got {}",
            opts.folds
        )));
    }
    let filter_config: FilterConfig = read_json(&opts.filter)?;
    let augment_config = AugmentConfig::from_value(read_json(&opts.augment)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", opts.augment.display())))?;
    let manifest = data_manifest(&opts.data)?;
    let task = resolve_task(&opts.task, &manifest);
    let spec = resolve_filter(filter_config, &manifest)?;

    let data = load_data(&opts.data)?;
    let dataset = &data.dataset;
    if !dataset
        .visits()
        .any(|v| v.labels.contains_key(&task.label_key))
    {
        return Err(CliError::Config(format!(
            "no visit carries label `{}`",
            task.label_key
        )));
    }
    let (graph, build) =
        build_graph(&data.edges, dataset).map_err(|e| CliError::Data(e.to_string()))?;
    let fg = filter(&graph, &spec).map_err(|e| CliError::Config(e.to_string()))?;
    let mut warnings = build.warnings();
    warnings.extend(fg.warnings.iter().cloned());

    let mut results = Vec::new();
    let mut augmentations = Vec::new();
    for (i, entry) in augment_config.0.iter().enumerate() {
        let name = entry
            .name
            .clone()
            .unwrap_or_else(|| format!("Augmented {}", i + 1));
        let aspec = augment_spec(entry, &spec);
        let result = augment(&fg, &aspec).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        augmentations.push(AugmentSummary {
            name: name.clone(),
            spec: aspec,
            hops_completed: result.hops_completed,
            stopped_early_at: result.stopped_early_at,
            rng_algorithm: result.rng_algorithm.clone(),
            node_count: result.node_set.len(),
            sampled_nodes: result.codes_with_origin(Origin::Sampled).len(),
            cohort_size: result.cohort_visit_ids.len(),
            nodes: result.node_set.clone(),
        });
        results.push((name, result));
    }

    let target = target_cohort(&fg, &spec, dataset);
    let available = fg.graph.all_visits().len();
    let mut skipped: BTreeMap<usize, String> = BTreeMap::new();
    let mut valid = Vec::new();
    for (i, &size) in opts.random_sizes.iter().enumerate() {
        if size > available {
            skipped.insert(
                i,
                format!("skipped: filtered graph holds {available} visits"),
            );
        } else if size < target.len() {
            skipped.insert(
                i,
                format!("skipped: smaller than the {}-visit target", target.len()),
            );
        } else {
            valid.push(size);
        }
    }
    let baselines = build_baseline_cohorts(&fg, &spec, dataset, &valid, opts.random_seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let mut random = baselines[1..].iter();

    let evaluate = |name: &str, ids: &BTreeSet<_>| -> TableRow {
        match cross_validate(
            dataset,
            ids,
            name,
            &task,
            opts.folds,
            opts.cv_seed,
            &opts.lr,
        ) {
            Ok(report) => TableRow {
                name: name.to_owned(),
                cohort_size: ids.len(),
                report: Some(report),
                note: None,
            },
            Err(e) => TableRow {
                name: name.to_owned(),
                cohort_size: ids.len(),
                report: None,
                note: Some(e.to_string()),
            },
        }
    };

    let mut rows = vec![evaluate("Target only", &target)];
    for (i, &size) in opts.random_sizes.iter().enumerate() {
        let name = format!("Random {}", i + 1);
        match skipped.get(&i) {
            Some(note) => rows.push(TableRow {
                name,
                cohort_size: size,
                report: None,
                note: Some(note.clone()),
            }),
            None => {
                let cohort = random.next().expect("one cohort per valid size");
                rows.push(evaluate(&name, &cohort.visit_ids));
            }
        }
    }
    for (name, result) in &results {
        rows.push(evaluate(name, &result.cohort_visit_ids));
    }

    let report = RunReport {
        data: opts.data.display().to_string(),
        task,
        filter: spec,
        folds: opts.folds,
        cv_seed: opts.cv_seed,
        random_seed: opts.random_seed,
        random_sizes: opts.random_sizes.clone(),
        lr: opts.lr,
        filtered_nodes: fg.graph.len(),
        filtered_visits: available,
        warnings,
        augmentations,
        rows,
    };
    Ok(RunOutcome { report, results })
}

/// Writes `<out>` (JSON) and `<out>` with a `.txt` extension (table).
pub fn write_report(report: &RunReport, out: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let env = |e: std::io::Error| CliError::Environment(format!("{}: {e}", out.display()));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(env)?;
    }
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(out, json + "\n").map_err(env)?;
    let table_path = out.with_extension("txt");
    fs::write(&table_path, report.table()).map_err(env)?;
    Ok((out.to_owned(), table_path))
}
