//! File formats: feature CSVs, JSON documents and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use tan_core::datasets::Split;
use tan_core::Tensor;

use crate::error::{Result, TanError};

pub const LABEL_COLUMN: &str = "label";

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| TanError::io(path, e))
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` next to `path` and renames it into place, so readers see
/// either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    let tmp = temp_path(path);
    let mut f = fs::File::create(&tmp).map_err(|e| TanError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| TanError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| TanError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| TanError::Json {
        path: path.to_owned(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| TanError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| TanError::Json {
        path: path.to_owned(),
        source: e,
    })
}

/// Serializes a split as `f0,…,f{d-1}[,label]` with full-precision values.
pub fn split_to_csv(split: &Split) -> Result<Vec<u8>> {
    let d = split.width();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    if split.labels.is_some() {
        header.push(LABEL_COLUMN.into());
    }
    let fail = |e: csv::Error| TanError::Config(format!("csv encoding: {e}"));
    w.write_record(&header).map_err(fail)?;
    for i in 0..split.len() {
        let mut row: Vec<String> = split.features.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(labels) = &split.labels {
            row.push(labels[i].to_string());
        }
        w.write_record(&row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| TanError::Config(format!("csv encoding: {e}")))
}

pub fn write_split(path: &Path, split: &Split) -> Result<()> {
    write_atomic(path, &split_to_csv(split)?)
}

/// Loads a split. Columns named `f0`, `f1`, … are features in that order;
/// a `label` column, if present, holds integer labels. Rows are kept in
/// file order. Errors name the 1-based data row.
pub fn load_csv(path: &Path) -> Result<Split> {
    let err = |row: usize, message: String| TanError::Csv {
        path: path.to_owned(),
        row,
        message,
    };
    let file = fs::File::open(path).map_err(|e| TanError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let header = r.headers().map_err(|e| err(0, e.to_string()))?.clone();

    let mut feature_cols: Vec<(usize, usize)> = Vec::new();
    let mut label_col = None;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if name == LABEL_COLUMN {
            label_col = Some(i);
        } else if let Some(k) = name.strip_prefix('f').and_then(|k| k.parse::<usize>().ok()) {
            feature_cols.push((k, i));
        } else {
            return Err(err(0, format!("unexpected column {name:?}; expected f0..f<d-1> and optional {LABEL_COLUMN}")));
        }
    }
    feature_cols.sort_unstable();
    if feature_cols.is_empty() || feature_cols.iter().enumerate().any(|(j, &(k, _))| j != k) {
        return Err(err(0, "feature columns must be f0..f<d-1> without gaps".into()));
    }

    let d = feature_cols.len();
    let mut data = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for (n, rec) in r.records().enumerate() {
        let row = n + 1;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        for &(k, col) in &feature_cols {
            let field = rec.get(col).unwrap_or("");
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(row, format!("column f{k}: {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(err(row, format!("column f{k}: value {v} is not finite")));
            }
            data.push(v);
        }
        if let (Some(col), Some(labels)) = (label_col, labels.as_mut()) {
            let field = rec.get(col).unwrap_or("");
            let y: usize = field
                .trim()
                .parse()
                .map_err(|_| err(row, format!("label {field:?} is not a class index")))?;
            labels.push(y);
        }
    }
    let rows = data.len() / d;
    if rows == 0 {
        return Err(err(0, "no data rows".into()));
    }
    Ok(Split {
        features: Tensor::matrix(rows, d, data)?,
        labels,
    })
}
