use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{DataError, PhenotypeVocabulary, VisitDataset, VisitRecord};
use crate::ids::ConceptCode;

pub const EDGES_FILE: &str = "ontology.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const VISITS_FILE: &str = "visits.jsonl";
pub const VOCABULARY_FILE: &str = "vocabulary.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_owned(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

/// Reads a `parent_code,child_code` CSV edge list.
pub fn load_edges(path: &Path) -> Result<Vec<(ConceptCode, ConceptCode)>, DataError> {
    let rows = read_two_column_csv(path, ("parent_code", "child_code"))?;
    rows.into_iter()
        .map(|(line, parent, child)| {
            if parent.is_empty() || child.is_empty() {
                Err(parse_err(path, line, "empty concept code"))
            } else {
                Ok((ConceptCode::new(parent), ConceptCode::new(child)))
            }
        })
        .collect()
}

/// Reads an optional `code,label` CSV.
pub fn load_labels(path: &Path) -> Result<BTreeMap<ConceptCode, String>, DataError> {
    let rows = read_two_column_csv(path, ("code", "label"))?;
    Ok(rows
        .into_iter()
        .map(|(_, code, label)| (ConceptCode::new(code), label))
        .collect())
}

fn read_two_column_csv(
    path: &Path,
    header: (&str, &str),
) -> Result<Vec<(usize, String, String)>, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != header.0 || &headers[1] != header.1 {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{},{}`", header.0, header.1),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_err(path, line, "expected two columns"));
        }
        rows.push((line, record[0].to_owned(), record[1].to_owned()));
    }
    Ok(rows)
}

/// Reads a vocabulary file: one phenotype name per line, blank lines ignored.
pub fn load_vocabulary(path: &Path) -> Result<PhenotypeVocabulary, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let names: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    PhenotypeVocabulary::new(names)
}

/// Parses a JSON Lines visit file without validating it against a vocabulary.
pub fn read_visits(path: &Path) -> Result<Vec<VisitRecord>, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut visits = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let visit: VisitRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        visits.push(visit);
    }
    Ok(visits)
}

pub fn load_dataset(visits_path: &Path, vocabulary_path: &Path) -> Result<VisitDataset, DataError> {
    let vocabulary = load_vocabulary(vocabulary_path)?;
    let visits = read_visits(visits_path)?;
    VisitDataset::new(vocabulary, visits)
}

pub fn write_edges(path: &Path, edges: &[(ConceptCode, ConceptCode)]) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_write_err(path, e))?;
    writer
        .write_record(["parent_code", "child_code"])
        .map_err(|e| csv_write_err(path, e))?;
    for (parent, child) in edges {
        writer
            .write_record([parent.as_str(), child.as_str()])
            .map_err(|e| csv_write_err(path, e))?;
    }
    writer.flush().map_err(io_err(path))
}

pub fn write_labels(path: &Path, labels: &BTreeMap<ConceptCode, String>) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_write_err(path, e))?;
    writer
        .write_record(["code", "label"])
        .map_err(|e| csv_write_err(path, e))?;
    for (code, label) in labels {
        writer
            .write_record([code.as_str(), label.as_str()])
            .map_err(|e| csv_write_err(path, e))?;
    }
    writer.flush().map_err(io_err(path))
}

fn csv_write_err(path: &Path, e: csv::Error) -> DataError {
    DataError::Io {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    }
}

pub fn write_vocabulary(path: &Path, vocabulary: &PhenotypeVocabulary) -> Result<(), DataError> {
    let mut out = String::new();
    for name in vocabulary.names() {
        out.push_str(name);
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn write_visits<'a, I>(path: &Path, visits: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = &'a VisitRecord>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for visit in visits {
        serde_json::to_writer(&mut out, visit).map_err(|e| DataError::Io {
            path: path.to_owned(),
            source: e.into(),
        })?;
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Files written by [`export_cohort`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportedFiles {
    pub visits: PathBuf,
    pub vocabulary: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `visits` to `path` (JSON Lines) with two sidecars next to it:
/// `<path>.vocabulary.txt` and `<path>.manifest.json`. The pair
/// (`visits`, `vocabulary`) reloads through [`load_dataset`].
pub fn export_cohort<'a, I, M>(
    visits: I,
    vocabulary: &PhenotypeVocabulary,
    manifest: &M,
    path: &Path,
) -> Result<ExportedFiles, DataError>
where
    I: IntoIterator<Item = &'a VisitRecord>,
    M: Serialize + ?Sized,
{
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let files = ExportedFiles {
        visits: path.to_owned(),
        vocabulary: sidecar(path, "vocabulary.txt"),
        manifest: sidecar(path, "manifest.json"),
    };
    write_visits(&files.visits, visits)?;
    write_vocabulary(&files.vocabulary, vocabulary)?;
    let json = serde_json::to_string_pretty(manifest).map_err(|e| DataError::Io {
        path: files.manifest.clone(),
        source: e.into(),
    })?;
    fs::write(&files.manifest, json + "\n").map_err(io_err(&files.manifest))?;
    Ok(files)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

/// File layout of a data directory as written by the generator.
#[derive(Clone, Debug)]
pub struct DataDir {
    pub edges: Vec<(ConceptCode, ConceptCode)>,
    pub labels: BTreeMap<ConceptCode, String>,
    pub dataset: VisitDataset,
}

/// Loads `ontology.csv`, `visits.jsonl`, `vocabulary.txt` and, when present,
/// `labels.csv` from `dir`.
pub fn load_data_dir(dir: &Path) -> Result<DataDir, DataError> {
    let edges = load_edges(&dir.join(EDGES_FILE))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        load_labels(&labels_path)?
    } else {
        BTreeMap::new()
    };
    let dataset = load_dataset(&dir.join(VISITS_FILE), &dir.join(VOCABULARY_FILE))?;
    Ok(DataDir {
        edges,
        labels,
        dataset,
    })
}
