//! The alternating training loop.
//!
//! Each epoch snapshots the main model as the assist model, takes one
//! Nesterov step on `{φ, ψ, ω}` per mini-batch pair, selects pivot data with
//! the updated model and finally takes one plain gradient step on the
//! adaptor `θ` against the feature-critic loss between assist and main.

mod optim;

pub use optim::{lr_schedule, NesterovSgd};

use alloc::borrow::Cow;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::datasets::{DomainDataset, NUM_CLASSES, POSITIVE_CLASS};
use crate::error::{Error, Result};
use crate::evaluation::{self, Bandwidth, MmdEstimator};
use crate::networks::{init_networks, AdaptorParams, NetworkParams, NetworkSpecs};
use crate::objectives::{
    feature_critic_loss, total_loss, AdaptorVariant, CriticActivation, DomainBatch, LossBreakdown,
    LossWeights, PairedPivot,
};
use crate::pivot::{pseudo_label_from_probs, select_pivot, PivotSet, PivotStrategy};
use crate::rng::{self, Stream};
use crate::tensor::Tensor;

fn default_feature_hidden() -> Vec<usize> {
    alloc::vec![64]
}
fn default_feature_dim() -> usize {
    32
}
fn default_discriminator_hidden() -> Vec<usize> {
    alloc::vec![32]
}
fn default_adaptor_hidden() -> Vec<usize> {
    alloc::vec![128, 64]
}
fn default_mmd_samples() -> usize {
    256
}

/// Every hyperparameter of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub mu: f64,
    /// Base learning rate of the main model.
    pub alpha: f64,
    /// Learning rate of the adaptor.
    pub beta: f64,
    pub gamma: f64,
    pub upsilon: f64,
    pub momentum: f64,
    pub batch_per_domain: usize,
    pub m: usize,
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sigma: CriticActivation,
    #[serde(default)]
    pub adaptor_variant: AdaptorVariant,
    #[serde(default)]
    pub pivot_strategy: PivotStrategy,
    #[serde(default = "default_feature_hidden")]
    pub feature_hidden: Vec<usize>,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_discriminator_hidden")]
    pub discriminator_hidden: Vec<usize>,
    #[serde(default = "default_adaptor_hidden")]
    pub adaptor_hidden: Vec<usize>,
    /// Samples per domain used for the per-epoch MMD diagnostic.
    #[serde(default = "default_mmd_samples")]
    pub mmd_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            mu: 0.1,
            alpha: 0.004,
            beta: 0.0005,
            gamma: 0.001,
            upsilon: 0.75,
            momentum: 0.9,
            batch_per_domain: 16,
            m: 8,
            epochs: 30,
            seed: 0,
            sigma: CriticActivation::Tanh,
            adaptor_variant: AdaptorVariant::Literal,
            pivot_strategy: PivotStrategy::TopM,
            feature_hidden: default_feature_hidden(),
            feature_dim: default_feature_dim(),
            discriminator_hidden: default_discriminator_hidden(),
            adaptor_hidden: default_adaptor_hidden(),
            mmd_samples: default_mmd_samples(),
        }
    }
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            mu: self.mu,
        }
    }

    /// Sets `m` and the matching per-domain batch size `m·|classes|`.
    pub fn with_pivot_size(mut self, m: usize) -> Self {
        self.m = m;
        self.batch_per_domain = m * NUM_CLASSES;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("learning rates must be > 0, got alpha={} beta={}", self.alpha, self.beta));
        }
        if !(self.gamma >= 0.0 && self.upsilon >= 0.0) {
            return bad(format!("gamma and upsilon must be >= 0, got {} and {}", self.gamma, self.upsilon));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.m == 0 {
            return bad(String::from("m must be >= 1"));
        }
        if self.batch_per_domain != self.m * NUM_CLASSES {
            return bad(format!(
                "batch_per_domain ({}) must equal m·classes ({}·{NUM_CLASSES})",
                self.batch_per_domain, self.m
            ));
        }
        if self.feature_dim == 0 || self.mmd_samples < 2 {
            return bad(String::from("feature_dim must be >= 1 and mmd_samples >= 2"));
        }
        Ok(())
    }

    pub fn network_specs(&self, input_dim: usize) -> NetworkSpecs {
        let b = self.batch_per_domain;
        NetworkSpecs::with_widths(
            input_dim,
            &self.feature_hidden,
            self.feature_dim,
            NUM_CLASSES,
            &self.discriminator_hidden,
            self.adaptor_variant.input_width(b, b),
            &self.adaptor_hidden,
        )
    }
}

/// Metrics and losses of one completed epoch (1-based `epoch`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_cls: f64,
    pub l_feat: f64,
    pub l_task: f64,
    pub l_val: f64,
    pub mmd: f64,
    pub val_precision: f64,
    pub val_recall: f64,
    pub val_f1: f64,
    pub val_accuracy: f64,
    pub val_auc: Option<f64>,
    pub lr: f64,
    pub adaptor_updated: bool,
    pub pivot_warnings: Vec<String>,
    /// Pivot samples chosen this epoch; `None` when `μ = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<PivotSet>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

/// Receives each epoch record as soon as it is complete.
pub trait EpochObserver {
    fn on_epoch(&mut self, record: &EpochRecord) -> Result<()>;
}

impl EpochObserver for () {
    fn on_epoch(&mut self, _: &EpochRecord) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&EpochRecord) -> Result<()>> EpochObserver for F {
    fn on_epoch(&mut self, record: &EpochRecord) -> Result<()> {
        self(record)
    }
}

fn check_finite(value: f64, term: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            term: String::from(term),
        })
    }
}

/// One Nesterov step on `{φ, ψ, ω}` against `L_cls + λ·L_feat + μ·L_task`.
///
/// `θ` enters as a constant: the task term moves the feature extractor but
/// the adaptor is left untouched. Returns the loss terms at the evaluation
/// point.
pub fn update_main(
    params: &mut NetworkParams,
    adaptor: Option<&AdaptorParams>,
    variant: AdaptorVariant,
    weights: LossWeights,
    batch: &DomainBatch,
    optimizer: &mut NesterovSgd,
    lr: f64,
) -> Result<LossBreakdown> {
    let eval_point = if optimizer.has_lookahead() {
        let mut look = params.clone();
        optimizer.shift_to_lookahead(look.tensors_mut());
        Cow::Owned(look)
    } else {
        Cow::Borrowed(&*params)
    };

    let mut g = Graph::new();
    let net = eval_point.bind(&mut g, true);
    let theta = if weights.mu > 0.0 {
        adaptor.map(|a| a.theta.bind(&mut g, false))
    } else {
        None
    };
    let loss = total_loss(&mut g, &net, theta.as_ref(), variant, weights, batch)?;
    let breakdown = loss.breakdown(&g);
    check_finite(breakdown.cls, "l_cls")?;
    check_finite(breakdown.feat, "l_feat")?;
    check_finite(breakdown.task, "l_task")?;
    check_finite(breakdown.total, "total loss")?;

    let grads = g.backward(loss.total)?;
    let phi = net.phi.gradients(&g, &grads);
    let psi = net.psi.gradients(&g, &grads);
    let omega = net.omega.gradients(&g, &grads);
    for (name, part) in [("phi", &phi), ("psi", &psi), ("omega", &omega)] {
        if !part.iter().all(Tensor::is_finite) {
            return Err(Error::NonFinite {
                term: format!("{name} gradient of the total loss"),
            });
        }
    }
    let all: Vec<Tensor> = phi.into_iter().chain(psi).chain(omega).collect();
    drop(eval_point);
    optimizer.step(params.tensors_mut(), &all, lr);
    Ok(breakdown)
}

/// One gradient step `θ ← θ − β·∇θ L_val`. Returns the loss, or `None`
/// when there is no class-complete pivot and `θ` is left unchanged.
pub fn update_adaptor(
    adaptor: &mut AdaptorParams,
    pivot: Option<&PairedPivot>,
    old: &NetworkParams,
    new: &NetworkParams,
    beta: f64,
    sigma: CriticActivation,
    variant: AdaptorVariant,
) -> Result<Option<f64>> {
    let Some(pivot) = pivot else {
        log::info!("adaptor update skipped: pivot set is not class-complete");
        return Ok(None);
    };
    let mut g = Graph::new();
    let theta = adaptor.theta.bind(&mut g, true);
    let loss = feature_critic_loss(&mut g, &theta, variant, sigma, pivot, old, new)?;
    let value = g.value(loss).item();
    check_finite(value, "l_val")?;
    let grads = g.backward(loss)?;
    let update = theta.gradients(&g, &grads);
    if !update.iter().all(Tensor::is_finite) {
        return Err(Error::NonFinite {
            term: String::from("theta gradient of l_val"),
        });
    }
    for (t, gr) in adaptor.theta.tensors_mut().zip(&update) {
        t.axpy(-beta, gr);
    }
    Ok(Some(value))
}

/// Predicted labels and class probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub probabilities: Tensor,
}

/// Single forward pass with fixed parameters.
pub fn predict(params: &NetworkParams, x: &Tensor) -> Result<Prediction> {
    let probabilities = crate::pivot::class_probabilities(params, x)?;
    let (labels, _) = pseudo_label_from_probs(&probabilities);
    Ok(Prediction { labels, probabilities })
}

/// Source and target row indices of one mini-batch pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchIndices {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// `count` evenly spaced indices in `0..n` (all of them if `n <= count`).
fn strided(n: usize, count: usize) -> Vec<usize> {
    if n <= count {
        (0..n).collect()
    } else {
        (0..count).map(|i| i * n / count).collect()
    }
}

/// Stateful driver of the training loop.
pub struct Trainer<'a> {
    config: TrainConfig,
    data: &'a DomainDataset,
    source_labels: &'a [usize],
    params: NetworkParams,
    adaptor: AdaptorParams,
    optimizer: NesterovSgd,
    assist: Option<NetworkParams>,
    iteration: u64,
    epoch: usize,
    mmd_source: Tensor,
    mmd_target: Tensor,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, data: &'a DomainDataset) -> Result<Self> {
        config.validate()?;
        data.validate()?;
        if data.source.is_empty() || data.target_train.is_empty() || data.target_validation.is_empty() {
            return Err(Error::EmptyInput("dataset split"));
        }
        let specs = config.network_specs(data.input_dim());
        let (params, adaptor) = init_networks(&specs, config.seed)?;
        let optimizer = NesterovSgd::new(config.momentum, params.tensors());
        let mmd_source = data
            .source
            .features
            .select_rows(&strided(data.source.len(), config.mmd_samples))?;
        let mmd_target = data
            .target_train
            .features
            .select_rows(&strided(data.target_train.len(), config.mmd_samples))?;
        Ok(Trainer {
            source_labels: data.source.labels()?,
            config,
            data,
            params,
            adaptor,
            optimizer,
            assist: None,
            iteration: 0,
            epoch: 0,
            mmd_source,
            mmd_target,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn adaptor(&self) -> &AdaptorParams {
        &self.adaptor
    }

    /// Snapshot taken at the start of the current epoch.
    pub fn assist(&self) -> Option<&NetworkParams> {
        self.assist.as_ref()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn epochs_completed(&self) -> usize {
        self.epoch
    }

    pub fn into_parts(self) -> (NetworkParams, AdaptorParams) {
        (self.params, self.adaptor)
    }

    /// Mini-batch plan of the next epoch: one pass over the larger domain,
    /// cycling the smaller; every batch holds exactly `batch_per_domain`
    /// rows per domain.
    pub fn epoch_batches(&self) -> Vec<BatchIndices> {
        let b = self.config.batch_per_domain;
        let mut r = rng::substream(self.config.seed, Stream::Shuffle, self.epoch as u64);
        let mut src: Vec<usize> = (0..self.data.source.len()).collect();
        let mut tgt: Vec<usize> = (0..self.data.target_train.len()).collect();
        src.shuffle(&mut r);
        tgt.shuffle(&mut r);
        let n = src.len().max(tgt.len());
        let batches = n.div_ceil(b);
        (0..batches)
            .map(|k| BatchIndices {
                source: (0..b).map(|j| src[(k * b + j) % src.len()]).collect(),
                target: (0..b).map(|j| tgt[(k * b + j) % tgt.len()]).collect(),
            })
            .collect()
    }

    /// Takes the assist snapshot and returns the epoch's batch plan.
    pub fn begin_epoch(&mut self) -> Vec<BatchIndices> {
        self.assist = Some(self.params.clone_params());
        self.epoch_batches()
    }

    /// One main-model update on a batch pair.
    pub fn step(&mut self, batch: &BatchIndices) -> Result<LossBreakdown> {
        let b = DomainBatch {
            source: self.data.source.features.select_rows(&batch.source)?,
            source_labels: batch.source.iter().map(|&i| self.source_labels[i]).collect(),
            target: self.data.target_train.features.select_rows(&batch.target)?,
        };
        let c = &self.config;
        let lr = lr_schedule(c.alpha, c.gamma, c.upsilon, self.iteration);
        let out = update_main(
            &mut self.params,
            Some(&self.adaptor),
            c.adaptor_variant,
            c.weights(),
            &b,
            &mut self.optimizer,
            lr,
        )?;
        self.iteration += 1;
        Ok(out)
    }

    /// Pivot selection, adaptor update and diagnostics after all batches.
    pub fn end_epoch(&mut self, losses: &[LossBreakdown]) -> Result<EpochRecord> {
        let assist = self
            .assist
            .take()
            .ok_or_else(|| Error::InvalidConfig(String::from("end_epoch called before begin_epoch")))?;
        self.epoch += 1;
        let c = &self.config;

        let mut l_val = 0.0;
        let mut adaptor_updated = false;
        let mut pivot_warnings = Vec::new();
        let mut pivot_set = None;
        if c.mu > 0.0 {
            let mut r = rng::substream(c.seed, Stream::Pivot, self.epoch as u64);
            let pivot = select_pivot(
                &self.params,
                &self.data.source.features,
                self.source_labels,
                &self.data.target_train.features,
                c.m,
                c.pivot_strategy,
                &mut r,
            )?;
            pivot_warnings = pivot.warnings.iter().map(|w| w.message()).collect();
            let paired = pivot.pair(&self.data.source.features, &self.data.target_train.features)?;
            if let Some(v) = update_adaptor(
                &mut self.adaptor,
                paired.as_ref(),
                &assist,
                &self.params,
                c.beta,
                c.sigma,
                c.adaptor_variant,
            )? {
                l_val = v;
                adaptor_updated = true;
            }
            pivot_set = Some(pivot);
        }

        let n = losses.len().max(1) as f64;
        let mean = |f: fn(&LossBreakdown) -> f64| losses.iter().map(f).sum::<f64>() / n;

        let val = &self.data.target_validation;
        let pred = predict(&self.params, &val.features)?;
        let labels = val.labels()?;
        let mut report = evaluation::compute_prf(&pred.labels, labels, POSITIVE_CLASS)?;
        let scores: Vec<f64> = (0..pred.probabilities.rows())
            .map(|i| pred.probabilities.get(i, POSITIVE_CLASS))
            .collect();
        report.auc = evaluation::roc_auc(&scores, labels, POSITIVE_CLASS).ok();

        let fs = self.params.forward_feature(&self.mmd_source)?;
        let ft = self.params.forward_feature(&self.mmd_target)?;
        let mmd = evaluation::mmd(&fs, &ft, MmdEstimator::Biased, Bandwidth::Median)?;

        let last_k = self.iteration.saturating_sub(1);
        Ok(EpochRecord {
            epoch: self.epoch,
            l_cls: mean(|b| b.cls),
            l_feat: mean(|b| b.feat),
            l_task: mean(|b| b.task),
            l_val,
            mmd,
            val_precision: report.precision,
            val_recall: report.recall,
            val_f1: report.f1,
            val_accuracy: report.accuracy,
            val_auc: report.auc,
            lr: lr_schedule(c.alpha, c.gamma, c.upsilon, last_k),
            adaptor_updated,
            pivot_warnings,
            pivot: pivot_set,
        })
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let plan = self.begin_epoch();
        let mut losses = Vec::with_capacity(plan.len());
        for b in &plan {
            losses.push(self.step(b)?);
        }
        self.end_epoch(&losses)
    }
}

/// Result of a complete run.
#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub params: NetworkParams,
    pub adaptor: AdaptorParams,
    pub log: TrainLog,
}

/// Trains for `config.epochs` epochs, reporting each record to `observer`
/// before moving on.
pub fn fit<O: EpochObserver + ?Sized>(
    config: &TrainConfig,
    data: &DomainDataset,
    observer: &mut O,
) -> Result<FitOutcome> {
    let mut trainer = Trainer::new(config.clone(), data)?;
    let mut log = TrainLog::default();
    for _ in 0..config.epochs {
        let record = trainer.run_epoch()?;
        observer.on_epoch(&record)?;
        log.records.push(record);
    }
    let (params, adaptor) = trainer.into_parts();
    Ok(FitOutcome { params, adaptor, log })
}
