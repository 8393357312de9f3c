//! Experiment configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tan_core::datasets::{GeneratorKind, ShiftSpec};
use tan_core::trainer::TrainConfig;

use crate::error::{Result, TanError};

/// Overrides the root that relative `output_dir` values resolve against.
pub const OUTPUT_ROOT_ENV: &str = "TAN_OUTPUT_ROOT";

pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Generated {
        generator: GeneratorKind,
        spec: ShiftSpec,
        #[serde(default)]
        seed: u64,
    },
    Files {
        source: PathBuf,
        target_train: PathBuf,
        target_validation: PathBuf,
    },
}

/// Which objective terms are active, named after the ablation rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ClsOnly,
    ClsTask,
    ClsFeat,
    Full,
}

impl Variant {
    /// Ablation table order: `L_cls`, `+L_task`, `+L_feat`, `+L_feat+L_task`.
    pub const ABLATION_ORDER: [Variant; 4] = [Variant::ClsOnly, Variant::ClsTask, Variant::ClsFeat, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ClsOnly => "cls_only",
            Variant::ClsTask => "cls_task",
            Variant::ClsFeat => "cls_feat",
            Variant::Full => "full",
        }
    }

    pub fn objective(self) -> &'static str {
        match self {
            Variant::ClsOnly => "L_cls",
            Variant::ClsTask => "L_cls+L_task",
            Variant::ClsFeat => "L_cls+L_feat",
            Variant::Full => "L_cls+L_feat+L_task",
        }
    }

    fn uses_feat(self) -> bool {
        matches!(self, Variant::ClsFeat | Variant::Full)
    }

    fn uses_task(self) -> bool {
        matches!(self, Variant::ClsTask | Variant::Full)
    }

    /// Zeroes the weights of the terms this variant leaves out and rejects
    /// a zero weight on a term it keeps.
    pub fn apply(self, train: &TrainConfig) -> Result<TrainConfig> {
        let mut out = train.clone();
        if !self.uses_feat() {
            out.lambda = 0.0;
        } else if train.lambda.is_nan() || train.lambda <= 0.0 {
            return Err(TanError::Config(format!("variant {self} needs lambda > 0, got {}", train.lambda)));
        }
        if !self.uses_task() {
            out.mu = 0.0;
        } else if train.mu.is_nan() || train.mu <= 0.0 {
            return Err(TanError::Config(format!("variant {self} needs mu > 0, got {}", train.mu)));
        }
        Ok(out)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub variant: Variant,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Write the selected pivot samples of every epoch.
    #[serde(default)]
    pub dump_pivots: bool,
    /// Write the final parameters of every seed.
    #[serde(default = "yes")]
    pub save_checkpoint: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TanError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| TanError::Config(format!("{}: {e}", path.display())))?;
        // dataset paths are relative to the config file
        if let DatasetConfig::Files {
            source,
            target_train,
            target_validation,
        } = &mut cfg.dataset
        {
            let base = path.parent().unwrap_or(Path::new(""));
            for p in [source, target_train, target_validation] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(TanError::Config(format!("name must be a plain non-empty file name, got {:?}", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(TanError::Config("seeds must not be empty".into()));
        }
        if let DatasetConfig::Generated { spec, .. } = &self.dataset {
            spec.validate()?;
        }
        self.variant.apply(&self.train)?.validate()?;
        Ok(())
    }

    /// Training settings after the variant has switched terms off.
    pub fn effective_train(&self) -> Result<TrainConfig> {
        self.variant.apply(&self.train)
    }

    /// Output directory, resolved against [`OUTPUT_ROOT_ENV`] when set.
    pub fn output_root(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn experiment_dir(&self) -> PathBuf {
        self.output_root().join(&self.name)
    }

    /// Copy with another variant, for ablations.
    pub fn with_variant(&self, variant: Variant) -> Self {
        ExperimentConfig {
            variant,
            ..self.clone()
        }
    }

    /// Digest of everything that determines one seed's results: the dataset
    /// (file contents for CSV datasets) and the effective training settings,
    /// seed excluded. Equal digests share cached runs.
    pub fn run_hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Key<'a> {
            dataset: DatasetKey<'a>,
            train: TrainConfig,
        }
        #[derive(Serialize)]
        #[serde(untagged)]
        enum DatasetKey<'a> {
            Generated(&'a DatasetConfig),
            Files([String; 3]),
        }
        let dataset = match &self.dataset {
            DatasetConfig::Generated { .. } => DatasetKey::Generated(&self.dataset),
            DatasetConfig::Files {
                source,
                target_train,
                target_validation,
            } => {
                let digest = |p: &PathBuf| -> Result<String> {
                    let bytes = std::fs::read(p).map_err(|e| TanError::io(p, e))?;
                    Ok(hex::encode(Sha256::digest(&bytes)))
                };
                DatasetKey::Files([digest(source)?, digest(target_train)?, digest(target_validation)?])
            }
        };
        let train = TrainConfig {
            seed: 0,
            ..self.effective_train()?
        };
        let text = serde_json::to_string(&Key { dataset, train }).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }
}

/// Parses `a..b` (inclusive) or a comma list into seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || TanError::Config(format!("invalid seed list {text:?}; use 0..9 or 1,2,3"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds: Vec<u64> = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> ExperimentConfig {
        ExperimentConfig {
            name: "demo".into(),
            dataset: DatasetConfig::Generated {
                generator: GeneratorKind::Moons,
                spec: ShiftSpec::shifted_moons_taskflip(),
                seed: 0,
            },
            train: TrainConfig::default(),
            variant: Variant::Full,
            seeds: vec![0, 1],
            output_dir: "out".into(),
            dump_pivots: false,
            save_checkpoint: true,
        }
    }

    #[test]
    fn variant_zeroes_weights() {
        let t = TrainConfig::default();
        let c = Variant::ClsOnly.apply(&t).unwrap();
        assert_eq!((c.lambda, c.mu), (0.0, 0.0));
        let c = Variant::ClsTask.apply(&t).unwrap();
        assert_eq!((c.lambda, c.mu), (0.0, t.mu));
        let c = Variant::ClsFeat.apply(&t).unwrap();
        assert_eq!((c.lambda, c.mu), (t.lambda, 0.0));
        assert_eq!(Variant::Full.apply(&t).unwrap(), t);
    }

    #[test]
    fn variant_rejects_missing_weight() {
        let t = TrainConfig { mu: 0.0, ..TrainConfig::default() };
        assert!(Variant::Full.apply(&t).is_err());
        assert!(Variant::ClsTask.apply(&t).is_err());
        assert!(Variant::ClsFeat.apply(&t).is_ok());
    }

    #[test]
    fn hash_ignores_seed_and_unused_weights() {
        let a = sample().with_variant(Variant::ClsOnly);
        let mut b = a.clone();
        b.train.seed = 9;
        b.train.lambda = 5.0;
        b.seeds = vec![3];
        assert_eq!(a.run_hash().unwrap(), b.run_hash().unwrap());
        assert_ne!(a.run_hash().unwrap(), sample().run_hash().unwrap());
    }

    #[test]
    fn json_round_trip() {
        let c = sample();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn seeds_default_to_ten() {
        let mut v = serde_json::to_value(sample()).unwrap();
        v.as_object_mut().unwrap().remove("seeds");
        let c: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert_eq!(c.seeds, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..9").unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("1,2").unwrap(), vec![1, 2]);
        assert_eq!(parse_seeds("4..4").unwrap(), vec![4]);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("a").is_err());
    }
}
