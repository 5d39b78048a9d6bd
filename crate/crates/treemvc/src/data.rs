//! Multi-view dataset manifests and headerless numeric CSV files.
//!
//! A manifest is a JSON document listing one CSV per view; relative paths are
//! resolved against the manifest's directory.
//!
//! ```json
//! { "name": "toy", "n": 3,
//!   "views": [ { "path": "view_1.csv", "dim": 2 }, { "path": "view_2.csv", "dim": 4 } ],
//!   "labels_path": "labels.csv" }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use treemvc_core::Tensor2;

use crate::error::{Error, IoContext, Result};

pub use treemvc_core::preprocess::{standardize, Standardizer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub path: PathBuf,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub views: Vec<ViewEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    pub n: usize,
}

/// Views loaded from a manifest, plus ground truth when the manifest has it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub views: Vec<Tensor2>,
    pub truth: Option<Vec<usize>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.views.first().map_or(0, Tensor2::rows)
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Tensor2::cols).collect()
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).at(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_error(path: &Path, record: &csv::StringRecord, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: record.position().map_or(0, |p| p.line()),
        message,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Reads a headerless comma-separated numeric matrix.
pub fn read_matrix(path: &Path) -> Result<Tensor2> {
    let mut reader = csv_reader(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            return Err(parse_error(
                path,
                &record,
                format!(
                    "ragged row: expected {width} values, found {}",
                    record.len()
                ),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(
                    path,
                    &record,
                    format!("non-numeric value {cell:?} in column {}", j + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    &record,
                    format!("non-finite value {cell:?}"),
                ));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Dataset(format!("{} is empty", path.display())))?;
    Ok(Tensor2::new(rows, cols, data)?)
}

/// Writes a matrix with shortest round-trip float formatting.
pub fn write_matrix(path: &Path, m: &Tensor2) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for row in m.iter_rows() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().at(path)
}

/// Reads one non-negative integer label per row.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut reader = csv_reader(path)?;
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 1 {
            return Err(parse_error(
                path,
                &record,
                format!("expected one label, found {}", record.len()),
            ));
        }
        let l = record[0]
            .parse()
            .map_err(|_| parse_error(path, &record, format!("invalid label {:?}", &record[0])))?;
        labels.push(l);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 2);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(path, text).at(path)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).at(path)?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.views.is_empty() {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            message: "no views listed".into(),
        });
    }
    Ok(manifest)
}

/// Loads and validates every view (and the labels, if listed) of a manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut views = Vec::with_capacity(manifest.views.len());
    for (v, entry) in manifest.views.iter().enumerate() {
        let path = resolve(base, &entry.path);
        let m = read_matrix(&path)?;
        if m.cols() != entry.dim {
            return Err(Error::Dataset(format!(
                "view {} ({}) has {} columns, manifest declares {}",
                v + 1,
                path.display(),
                m.cols(),
                entry.dim
            )));
        }
        views.push((path, m));
    }
    for (v, pair) in views.windows(2).enumerate() {
        if pair[0].1.rows() != pair[1].1.rows() {
            return Err(Error::Dataset(format!(
                "row count mismatch: view {} ({}) has {} rows, view {} ({}) has {}",
                v + 1,
                pair[0].0.display(),
                pair[0].1.rows(),
                v + 2,
                pair[1].0.display(),
                pair[1].1.rows()
            )));
        }
    }
    if views[0].1.rows() != manifest.n {
        return Err(Error::Dataset(format!(
            "views have {} rows, manifest declares n = {}",
            views[0].1.rows(),
            manifest.n
        )));
    }
    let truth = match &manifest.labels_path {
        Some(p) => {
            let path = resolve(base, p);
            let labels = read_labels(&path)?;
            if labels.len() != manifest.n {
                return Err(Error::Dataset(format!(
                    "labels file {} has {} rows, expected {}",
                    path.display(),
                    labels.len(),
                    manifest.n
                )));
            }
            Some(labels)
        }
        None => None,
    };
    Ok(Dataset {
        name: manifest.name,
        views: views.into_iter().map(|(_, m)| m).collect(),
        truth,
    })
}

/// Writes each view and the labels next to a new manifest inside `dir`.
pub fn save_dataset(
    dir: &Path,
    name: &str,
    views: &[Tensor2],
    truth: Option<&[usize]>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).at(dir)?;
    let n = views.first().map_or(0, Tensor2::rows);
    let mut entries = Vec::with_capacity(views.len());
    for (v, m) in views.iter().enumerate() {
        let file = PathBuf::from(format!("view_{}.csv", v + 1));
        write_matrix(&dir.join(&file), m)?;
        entries.push(ViewEntry {
            path: file,
            dim: m.cols(),
        });
    }
    let labels_path = match truth {
        Some(t) => {
            let file = PathBuf::from("labels.csv");
            write_labels(&dir.join(&file), t)?;
            Some(file)
        }
        None => None,
    };
    let manifest = DatasetManifest {
        name: name.to_string(),
        views: entries,
        labels_path,
        n,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).at(&path)?;
    Ok(path)
}
