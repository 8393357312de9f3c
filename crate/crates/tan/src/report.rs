//! Run outputs: training-log and pivot CSVs, metrics and ROC files,
//! aggregates across seeds and the ablation table.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tan_core::evaluation::{MetricsReport, RocPoint};
use tan_core::trainer::{EpochObserver, EpochRecord};

use crate::config::Variant;
use crate::error::{Result, TanError};
use crate::io;

pub const TRAIN_LOG_HEADER: &str =
    "epoch,l_cls,l_feat,l_task,l_val,mmd,val_precision,val_recall,val_f1,val_accuracy,lr";
pub const PIVOT_HEADER: &str = "epoch,domain,class,sample_index,confidence";

fn csv_err(path: &Path, e: impl std::fmt::Display) -> TanError {
    TanError::Config(format!("{}: csv encoding: {e}", path.display()))
}

/// Appends one row per epoch to the training-log CSV, flushed as soon as it
/// is written so a crashed run keeps its completed epochs. With a pivot
/// path it also dumps the selected pivot samples.
pub struct TrainLogWriter {
    path: PathBuf,
    log: BufWriter<fs::File>,
    pivots: Option<(PathBuf, BufWriter<fs::File>)>,
}

fn create(path: &Path, header: &str) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        io::create_dir(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(|e| TanError::io(path, e))?);
    writeln!(w, "{header}")
        .and_then(|_| w.flush())
        .map_err(|e| TanError::io(path, e))?;
    Ok(w)
}

impl TrainLogWriter {
    pub fn create(path: &Path, pivot_path: Option<&Path>) -> Result<Self> {
        let pivots = match pivot_path {
            Some(p) => Some((p.to_owned(), create(p, PIVOT_HEADER)?)),
            None => None,
        };
        Ok(TrainLogWriter {
            path: path.to_owned(),
            log: create(path, TRAIN_LOG_HEADER)?,
            pivots,
        })
    }

    fn write_record(&mut self, r: &EpochRecord) -> Result<()> {
        let row = [
            r.l_cls, r.l_feat, r.l_task, r.l_val, r.mmd, r.val_precision, r.val_recall, r.val_f1, r.val_accuracy, r.lr,
        ]
        .iter()
        .fold(r.epoch.to_string(), |mut acc, v| {
            acc.push(',');
            acc.push_str(&v.to_string());
            acc
        });
        writeln!(self.log, "{row}")
            .and_then(|_| self.log.flush())
            .map_err(|e| TanError::io(&self.path, e))?;

        if let (Some((path, w)), Some(pivot)) = (self.pivots.as_mut(), r.pivot.as_ref()) {
            for (domain, by_class) in [("source", &pivot.source_by_class), ("target", &pivot.target_by_class)] {
                for (class, entries) in by_class.iter().enumerate() {
                    for e in entries {
                        writeln!(w, "{},{domain},{class},{},{}", r.epoch, e.index, e.confidence)
                            .map_err(|err| TanError::io(&*path, err))?;
                    }
                }
            }
            w.flush().map_err(|e| TanError::io(&*path, e))?;
        }
        Ok(())
    }
}

impl EpochObserver for TrainLogWriter {
    fn on_epoch(&mut self, record: &EpochRecord) -> tan_core::Result<()> {
        self.write_record(record).map_err(|e| tan_core::Error::Observer(e.to_string()))
    }
}

pub fn roc_to_csv(points: &[RocPoint]) -> Result<Vec<u8>> {
    let path = Path::new("roc.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fpr", "tpr", "threshold"]).map_err(|e| csv_err(path, e))?;
    for p in points {
        w.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.into_inner().map_err(|e| csv_err(path, e))
}

/// The four headline metrics plus AUC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

impl From<&MetricsReport> for MetricSet {
    fn from(r: &MetricsReport) -> Self {
        MetricSet {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            accuracy: r.accuracy,
            auc: r.auc,
        }
    }
}

/// Arithmetic mean and sample standard deviation (zero for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub seed: u64,
    /// Metrics file, relative to the aggregate file.
    pub metrics: PathBuf,
    /// Training log, relative to the aggregate file.
    pub log: PathBuf,
    /// Feature MMD after the first and the last epoch.
    pub first_mmd: Option<f64>,
    pub final_mmd: Option<f64>,
}

/// Mean and standard deviation across the configured seeds, with the
/// per-seed files it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub experiment: String,
    pub variant: Variant,
    pub run_hash: String,
    pub seeds: Vec<SeedEntry>,
    pub mean: MetricSet,
    pub std: MetricSet,
}

impl Aggregate {
    pub fn from_runs(experiment: &str, variant: Variant, run_hash: &str, runs: &[(SeedEntry, MetricsReport)]) -> Self {
        let pick = |f: fn(&MetricsReport) -> f64| mean_std(&runs.iter().map(|(_, m)| f(m)).collect::<Vec<_>>());
        let (p, ps) = pick(|m| m.precision);
        let (r, rs) = pick(|m| m.recall);
        let (f, fs) = pick(|m| m.f1);
        let (a, as_) = pick(|m| m.accuracy);
        let aucs: Option<Vec<f64>> = runs.iter().map(|(_, m)| m.auc).collect();
        let (auc, auc_s) = match aucs {
            Some(v) if !v.is_empty() => {
                let (m, s) = mean_std(&v);
                (Some(m), Some(s))
            }
            _ => (None, None),
        };
        Aggregate {
            experiment: experiment.into(),
            variant,
            run_hash: run_hash.into(),
            seeds: runs.iter().map(|(e, _)| e.clone()).collect(),
            mean: MetricSet {
                precision: p,
                recall: r,
                f1: f,
                accuracy: a,
                auc,
            },
            std: MetricSet {
                precision: ps,
                recall: rs,
                f1: fs,
                accuracy: as_,
                auc: auc_s,
            },
        }
    }

    /// Seeds whose feature MMD ended below its first-epoch value.
    pub fn mmd_decreased(&self) -> usize {
        self.seeds
            .iter()
            .filter(|s| matches!((s.first_mmd, s.final_mmd), (Some(a), Some(b)) if b < a))
            .count()
    }
}

/// `x` as a percentage with one decimal.
pub fn percent(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn pm(mean: f64, std: f64) -> String {
    format!("{} ± {}", percent(mean), percent(std))
}

/// Ablation rows in table order, as CSV.
pub fn ablation_csv(rows: &[Aggregate]) -> Result<Vec<u8>> {
    let path = Path::new("ablation.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "variant",
        "objective",
        "precision",
        "precision_std",
        "recall",
        "recall_std",
        "f1",
        "f1_std",
        "accuracy",
        "accuracy_std",
    ])
    .map_err(|e| csv_err(path, e))?;
    for a in rows {
        let (m, s) = (&a.mean, &a.std);
        w.write_record([
            a.variant.name().to_string(),
            a.variant.objective().to_string(),
            percent(m.precision),
            percent(s.precision),
            percent(m.recall),
            percent(s.recall),
            percent(m.f1),
            percent(s.f1),
            percent(m.accuracy),
            percent(s.accuracy),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.into_inner().map_err(|e| csv_err(path, e))
}

/// Ablation rows as an aligned text table, mean ± std in percent.
pub fn ablation_text(rows: &[Aggregate]) -> String {
    let header = ["Objective", "P", "R", "F1", "Acc"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|a| {
            [
                a.variant.objective().to_string(),
                pm(a.mean.precision, a.std.precision),
                pm(a.mean.recall, a.std.recall),
                pm(a.mean.f1, a.std.f1),
                pm(a.mean.accuracy, a.std.accuracy),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            let pad = w - cell.chars().count();
            if i == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}
