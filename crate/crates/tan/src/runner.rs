//! Commands: dataset generation, multi-seed training, ablations and sweeps.
//!
//! Layout under `<output root>/<experiment name>/`:
//!
//! ```text
//! data/{source,target_train,target_validation}.csv, dataset.json
//! runs/<run hash>/config.json, aggregate.json
//! runs/<run hash>/seed-N/{log.csv,pivots.csv,metrics.json,roc.csv,checkpoint.json}
//! ablation.csv, ablation.txt, sweep-<param>.csv
//! ```
//!
//! A seed directory whose `metrics.json` exists is complete and is reused.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use tan_core::datasets::{generate_kind, DomainDataset, Provenance};
use tan_core::evaluation::{compute_prf, roc_auc, roc_curve, MetricsReport};
use tan_core::trainer::{fit, predict, TrainConfig};
use tan_core::datasets::POSITIVE_CLASS;

use crate::checkpoint::Checkpoint;
use crate::config::{DatasetConfig, ExperimentConfig, Variant};
use crate::error::{Result, TanError};
use crate::io;
use crate::report::{self, Aggregate, SeedEntry, TRAIN_LOG_HEADER};

pub const SPLIT_FILES: [&str; 3] = ["source.csv", "target_train.csv", "target_validation.csv"];

pub fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.experiment_dir().join("data")
}

pub fn run_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    Ok(cfg.experiment_dir().join("runs").join(cfg.run_hash()?))
}

pub fn seed_dir(cfg: &ExperimentConfig, seed: u64) -> Result<PathBuf> {
    Ok(run_dir(cfg)?.join(format!("seed-{seed}")))
}

/// Builds or loads the dataset named by the config.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<DomainDataset> {
    let data = match &cfg.dataset {
        DatasetConfig::Generated { generator, spec, seed } => generate_kind(*generator, spec, *seed)?,
        DatasetConfig::Files {
            source,
            target_train,
            target_validation,
        } => DomainDataset {
            source: io::load_csv(source)?,
            target_train: io::load_csv(target_train)?,
            target_validation: io::load_csv(target_validation)?,
            metadata: Provenance::Files {
                source: source.display().to_string(),
                target_train: target_train.display().to_string(),
                target_validation: target_validation.display().to_string(),
            },
        },
    };
    data.validate()?;
    Ok(data)
}

/// Writes the three splits and their provenance under `data/`.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    if !matches!(cfg.dataset, DatasetConfig::Generated { .. }) {
        return Err(TanError::Config("generate needs a generated dataset, not CSV files".into()));
    }
    let data = load_dataset(cfg)?;
    let dir = data_dir(cfg);
    let mut written = Vec::new();
    for (name, split) in SPLIT_FILES
        .iter()
        .zip([&data.source, &data.target_train, &data.target_validation])
    {
        let p = dir.join(name);
        io::write_split(&p, split)?;
        written.push(p);
    }
    let p = dir.join("dataset.json");
    io::write_json(&p, &data.metadata)?;
    written.push(p);
    log::info!("wrote dataset to {}", dir.display());
    Ok(written)
}

/// One completed seed.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics: MetricsReport,
    pub first_mmd: Option<f64>,
    pub final_mmd: Option<f64>,
}

fn mmd_column(log: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(log).map_err(|e| TanError::Csv {
        path: log.to_owned(),
        row: 0,
        message: e.to_string(),
    })?;
    let col = TRAIN_LOG_HEADER.split(',').position(|c| c == "mmd").expect("mmd column");
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let bad = |message: String| TanError::Csv {
                path: log.to_owned(),
                row: i + 1,
                message,
            };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            rec.get(col)
                .unwrap_or("")
                .parse()
                .map_err(|_| bad("mmd is not a number".into()))
        })
        .collect()
}

fn seed_run(seed: u64, dir: PathBuf, metrics: MetricsReport) -> Result<SeedRun> {
    let mmd = mmd_column(&dir.join("log.csv"))?;
    Ok(SeedRun {
        seed,
        dir,
        metrics,
        first_mmd: mmd.first().copied(),
        final_mmd: mmd.last().copied(),
    })
}

/// Final-model metrics on the target validation split.
pub fn evaluate(params: &tan_core::networks::NetworkParams, data: &DomainDataset) -> Result<(MetricsReport, Vec<u8>)> {
    let val = &data.target_validation;
    let labels = val.labels()?;
    let pred = predict(params, &val.features)?;
    let mut metrics = compute_prf(&pred.labels, labels, POSITIVE_CLASS)?;
    let scores: Vec<f64> = (0..pred.probabilities.rows())
        .map(|i| pred.probabilities.get(i, POSITIVE_CLASS))
        .collect();
    metrics.auc = roc_auc(&scores, labels, POSITIVE_CLASS).ok();
    let roc = match roc_curve(&scores, labels, POSITIVE_CLASS) {
        Ok(points) => report::roc_to_csv(&points)?,
        Err(_) => report::roc_to_csv(&[])?,
    };
    Ok((metrics, roc))
}

/// Trains one seed, or returns the cached result of an identical run.
pub fn run_seed(cfg: &ExperimentConfig, train: &TrainConfig, data: &DomainDataset, seed: u64) -> Result<SeedRun> {
    let dir = seed_dir(cfg, seed)?;
    let metrics_path = dir.join("metrics.json");
    if metrics_path.exists() {
        log::info!("{}: seed {seed} cached", cfg.name);
        return seed_run(seed, dir, io::read_json(&metrics_path)?);
    }
    io::create_dir(&dir)?;
    let config = TrainConfig {
        seed,
        ..train.clone()
    };
    let pivots = cfg.dump_pivots.then(|| dir.join("pivots.csv"));
    let mut writer = report::TrainLogWriter::create(&dir.join("log.csv"), pivots.as_deref())?;
    log::info!("{}: training {} seed {seed}", cfg.name, cfg.variant);
    let out = fit(&config, data, &mut writer)?;
    drop(writer);

    if cfg.save_checkpoint {
        Checkpoint::from_params(&out.params, &out.adaptor).save(&dir.join("checkpoint.json"))?;
    }
    let (metrics, roc) = evaluate(&out.params, data)?;
    io::write_atomic(&dir.join("roc.csv"), &roc)?;
    // written last: its presence marks the seed complete
    io::write_json(&metrics_path, &metrics)?;
    seed_run(seed, dir, metrics)
}

#[derive(Serialize)]
struct RunConfig<'a> {
    name: &'a str,
    variant: Variant,
    dataset: &'a DatasetConfig,
    train: &'a TrainConfig,
}

/// Trains every seed (in parallel), then writes `aggregate.json`. When a
/// seed fails, the others still finish and keep their outputs; the first
/// failure in seed order is returned.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(Aggregate, PathBuf)> {
    cfg.validate()?;
    let train = cfg.effective_train()?;
    let data = load_dataset(cfg)?;
    let hash = cfg.run_hash()?;
    let dir = run_dir(cfg)?;
    io::write_json(
        &dir.join("config.json"),
        &RunConfig {
            name: &cfg.name,
            variant: cfg.variant,
            dataset: &cfg.dataset,
            train: &train,
        },
    )?;

    let results: Vec<Result<SeedRun>> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, &train, &data, s)).collect();
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }

    let entries: Vec<(SeedEntry, MetricsReport)> = runs
        .into_iter()
        .map(|r| {
            let rel = PathBuf::from(format!("seed-{}", r.seed));
            (
                SeedEntry {
                    seed: r.seed,
                    metrics: rel.join("metrics.json"),
                    log: rel.join("log.csv"),
                    first_mmd: r.first_mmd,
                    final_mmd: r.final_mmd,
                },
                r.metrics,
            )
        })
        .collect();
    let agg = Aggregate::from_runs(&cfg.name, cfg.variant, &hash, &entries);
    let path = dir.join("aggregate.json");
    io::write_json(&path, &agg)?;
    Ok((agg, path))
}

/// All four objective variants in table order.
pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<Vec<Aggregate>> {
    let rows = Variant::ABLATION_ORDER
        .iter()
        .map(|&v| cmd_train(&cfg.with_variant(v)).map(|(a, _)| a))
        .collect::<Result<Vec<_>>>()?;
    let dir = cfg.experiment_dir();
    io::write_atomic(&dir.join("ablation.csv"), &report::ablation_csv(&rows)?)?;
    io::write_atomic(&dir.join("ablation.txt"), report::ablation_text(&rows).as_bytes())?;
    Ok(rows)
}

/// A swept setting. `LambdaMu` spans the full grid of value pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    LambdaMu,
    Lambda,
    Mu,
    M,
    Sigma,
    Alpha,
    Beta,
    PivotStrategy,
    AdaptorVariant,
    AdaptorHidden,
}

impl SweepParam {
    pub const ALL: [SweepParam; 10] = [
        SweepParam::LambdaMu,
        SweepParam::Lambda,
        SweepParam::Mu,
        SweepParam::M,
        SweepParam::Sigma,
        SweepParam::Alpha,
        SweepParam::Beta,
        SweepParam::PivotStrategy,
        SweepParam::AdaptorVariant,
        SweepParam::AdaptorHidden,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::LambdaMu => "lambda,mu",
            SweepParam::Lambda => "lambda",
            SweepParam::Mu => "mu",
            SweepParam::M => "m",
            SweepParam::Sigma => "sigma",
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::PivotStrategy => "pivot_strategy",
            SweepParam::AdaptorVariant => "adaptor_variant",
            SweepParam::AdaptorHidden => "adaptor_hidden",
        }
    }

    fn file_stem(self) -> String {
        self.name().replace(',', "-")
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = TanError;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s.trim()).ok_or_else(|| {
            let names: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            TanError::Config(format!("unknown sweep parameter {s:?}; expected one of {}", names.join(" | ")))
        })
    }
}

fn parse_f64(v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| TanError::Config(format!("{v:?} is not a number")))
}

/// Parses a snake_case enum name through its serde representation.
fn parse_named<T: serde::de::DeserializeOwned>(v: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(v.trim().into()))
        .map_err(|e| TanError::Config(format!("{v:?}: {e}")))
}

/// Widths joined by `x`, e.g. `128x64`; `none` for no hidden layer.
fn parse_widths(v: &str) -> Result<Vec<usize>> {
    if v.trim() == "none" {
        return Ok(Vec::new());
    }
    v.split('x')
        .map(|w| {
            w.trim()
                .parse()
                .map_err(|_| TanError::Config(format!("{v:?} is not a layer list like 128x64")))
        })
        .collect()
}

fn set_value(train: &mut TrainConfig, param: SweepParam, v: &str) -> Result<()> {
    match param {
        SweepParam::Lambda => train.lambda = parse_f64(v)?,
        SweepParam::Mu => train.mu = parse_f64(v)?,
        SweepParam::M => {
            let m = v
                .trim()
                .parse()
                .map_err(|_| TanError::Config(format!("{v:?} is not a pivot size")))?;
            *train = train.clone().with_pivot_size(m);
        }
        SweepParam::Sigma => train.sigma = parse_named(v)?,
        SweepParam::Alpha => train.alpha = parse_f64(v)?,
        SweepParam::Beta => train.beta = parse_f64(v)?,
        SweepParam::PivotStrategy => train.pivot_strategy = parse_named(v)?,
        SweepParam::AdaptorVariant => train.adaptor_variant = parse_named(v)?,
        SweepParam::AdaptorHidden => train.adaptor_hidden = parse_widths(v)?,
        SweepParam::LambdaMu => unreachable!("grid cells set lambda and mu separately"),
    }
    Ok(())
}

/// One sweep cell: its setting and either the aggregate or the error.
#[derive(Debug)]
pub struct SweepCell {
    pub values: Vec<String>,
    pub outcome: Result<Aggregate>,
}

#[derive(Debug)]
pub struct SweepResult {
    pub param: SweepParam,
    pub values: Vec<String>,
    pub cells: Vec<SweepCell>,
    pub csv: PathBuf,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

fn cell_config(cfg: &ExperimentConfig, param: SweepParam, values: &[&str]) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    c.save_checkpoint = false;
    match param {
        SweepParam::LambdaMu => {
            set_value(&mut c.train, SweepParam::Lambda, values[0])?;
            set_value(&mut c.train, SweepParam::Mu, values[1])?;
        }
        p => set_value(&mut c.train, p, values[0])?,
    }
    c.validate()?;
    Ok(c)
}

/// Runs one training job per grid cell and writes `sweep-<param>.csv`.
/// A failed cell is logged and left blank; the sweep carries on.
pub fn cmd_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[String]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(TanError::Config("sweep needs at least one value".into()));
    }
    let switched_off = match param {
        SweepParam::LambdaMu => cfg.variant != Variant::Full,
        SweepParam::Lambda => !matches!(cfg.variant, Variant::ClsFeat | Variant::Full),
        SweepParam::Mu | SweepParam::M | SweepParam::Sigma | SweepParam::Beta => {
            !matches!(cfg.variant, Variant::ClsTask | Variant::Full)
        }
        SweepParam::PivotStrategy | SweepParam::AdaptorVariant | SweepParam::AdaptorHidden => {
            !matches!(cfg.variant, Variant::ClsTask | Variant::Full)
        }
        SweepParam::Alpha => false,
    };
    if switched_off {
        return Err(TanError::Config(format!(
            "variant {} does not use the swept parameter {param}",
            cfg.variant
        )));
    }

    let grid: Vec<Vec<&str>> = match param {
        SweepParam::LambdaMu => values
            .iter()
            .flat_map(|l| values.iter().map(move |m| vec![l.as_str(), m.as_str()]))
            .collect(),
        _ => values.iter().map(|v| vec![v.as_str()]).collect(),
    };
    let cells: Vec<SweepCell> = grid
        .into_iter()
        .map(|vals| {
            let outcome = cell_config(cfg, param, &vals).and_then(|c| cmd_train(&c).map(|(a, _)| a));
            if let Err(e) = &outcome {
                log::error!("sweep cell {param}={}: {e}", vals.join(","));
            }
            SweepCell {
                values: vals.into_iter().map(String::from).collect(),
                outcome,
            }
        })
        .collect();

    let csv = cfg.experiment_dir().join(format!("sweep-{}.csv", param.file_stem()));
    let bytes = match param {
        SweepParam::LambdaMu => sweep_matrix_csv(values, &cells)?,
        _ => sweep_rows_csv(param, &cells)?,
    };
    io::write_atomic(&csv, &bytes)?;
    Ok(SweepResult {
        param,
        values: values.to_vec(),
        cells,
        csv,
    })
}

fn encode_err(e: csv::Error) -> TanError {
    TanError::Config(format!("csv encoding: {e}"))
}

/// Mean F1 in percent, rows λ and columns μ; failed cells are empty.
fn sweep_matrix_csv(values: &[String], cells: &[SweepCell]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lambda\\mu".to_string()];
    header.extend(values.iter().cloned());
    w.write_record(&header).map_err(encode_err)?;
    for (i, l) in values.iter().enumerate() {
        let mut row = vec![l.clone()];
        for c in &cells[i * values.len()..(i + 1) * values.len()] {
            row.push(c.outcome.as_ref().map(|a| report::percent(a.mean.f1)).unwrap_or_default());
        }
        w.write_record(&row).map_err(encode_err)?;
    }
    w.into_inner().map_err(|e| TanError::Config(format!("csv encoding: {e}")))
}

fn sweep_rows_csv(param: SweepParam, cells: &[SweepCell]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([param.name(), "precision", "recall", "f1", "f1_std", "accuracy", "status"])
        .map_err(encode_err)?;
    for c in cells {
        let v = c.values.join(",");
        let row = match &c.outcome {
            Ok(a) => [
                v,
                report::percent(a.mean.precision),
                report::percent(a.mean.recall),
                report::percent(a.mean.f1),
                report::percent(a.std.f1),
                report::percent(a.mean.accuracy),
                "ok".into(),
            ],
            Err(e) => [v, String::new(), String::new(), String::new(), String::new(), String::new(), format!("error: {e}")],
        };
        w.write_record(&row).map_err(encode_err)?;
    }
    w.into_inner().map_err(|e| TanError::Config(format!("csv encoding: {e}")))
}

/// Removes a directory tree if it exists.
pub fn clear_dir(path: &Path) -> Result<()> {
    match fs::remove_dir_all(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(TanError::io(path, e)),
    }
}
