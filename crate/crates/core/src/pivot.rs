//! Pivot data: per class and per domain, the `m` samples the current model
//! is most confident about. Source samples are grouped by their true label,
//! target samples by their pseudo-label.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::networks::NetworkParams;
use crate::objectives::PairedPivot;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotStrategy {
    #[default]
    TopM,
    RandomM,
    BottomM,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotEntry {
    pub index: usize,
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotWarning {
    pub domain: Domain,
    pub class: usize,
}

impl PivotWarning {
    pub fn message(&self) -> String {
        format!("no {} pivot candidates for class {}", self.domain.name(), self.class)
    }
}

/// Selected pivot samples. Each class list is ordered by decreasing
/// confidence, ties by increasing dataset index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotSet {
    pub m: usize,
    pub source_by_class: Vec<Vec<PivotEntry>>,
    pub target_by_class: Vec<Vec<PivotEntry>>,
    pub warnings: Vec<PivotWarning>,
}

impl PivotSet {
    pub fn num_classes(&self) -> usize {
        self.source_by_class.len()
    }

    /// True when every class has at least one sample on both domains.
    pub fn is_class_complete(&self) -> bool {
        self.source_by_class
            .iter()
            .chain(&self.target_by_class)
            .all(|c| !c.is_empty())
    }

    pub fn domain_size(&self, domain: Domain) -> usize {
        match domain {
            Domain::Source => self.source_by_class.iter().map(Vec::len).sum(),
            Domain::Target => self.target_by_class.iter().map(Vec::len).sum(),
        }
    }

    /// Aligns the two domains by class and within-class rank, `m` rows per
    /// class. A class with fewer than `m` entries on one side is cycled from
    /// its top entry again. Returns `None` if any class is empty.
    pub fn pair(&self, source_x: &Tensor, target_x: &Tensor) -> Result<Option<PairedPivot>> {
        if !self.is_class_complete() {
            return Ok(None);
        }
        let mut src_idx = Vec::with_capacity(self.m * self.num_classes());
        let mut tgt_idx = Vec::with_capacity(self.m * self.num_classes());
        for (s, t) in self.source_by_class.iter().zip(&self.target_by_class) {
            for r in 0..self.m {
                src_idx.push(s[r % s.len()].index);
                tgt_idx.push(t[r % t.len()].index);
            }
        }
        PairedPivot::new(source_x.select_rows(&src_idx)?, target_x.select_rows(&tgt_idx)?).map(Some)
    }
}

/// Argmax labels and max probabilities per row. Ties go to the lowest class.
pub fn pseudo_label_from_probs(probs: &Tensor) -> (Vec<usize>, Vec<f64>) {
    (0..probs.rows())
        .map(|i| {
            let row = probs.row(i);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            (best, row[best])
        })
        .unzip()
}

/// Class probabilities of the main model on `x`.
pub fn class_probabilities(params: &NetworkParams, x: &Tensor) -> Result<Tensor> {
    let f = params.forward_feature(x)?;
    params.forward_classifier(&f)
}

pub fn pseudo_label(params: &NetworkParams, x: &Tensor) -> Result<(Vec<usize>, Vec<f64>)> {
    Ok(pseudo_label_from_probs(&class_probabilities(params, x)?))
}

/// Decreasing confidence, then increasing index.
fn rank_order(a: &PivotEntry, b: &PivotEntry) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.index.cmp(&b.index))
}

/// Chooses up to `m` of `candidates` per `strategy` and returns them in
/// rank order. `bottom_m` takes the `m` lowest-confidence candidates (ties
/// by increasing index).
pub fn select_class<R: Rng + ?Sized>(
    mut candidates: Vec<PivotEntry>,
    m: usize,
    strategy: PivotStrategy,
    rng: &mut R,
) -> Vec<PivotEntry> {
    let k = m.min(candidates.len());
    let mut chosen = match strategy {
        _ if k == candidates.len() => candidates,
        PivotStrategy::TopM => {
            candidates.select_nth_unstable_by(k - 1, rank_order);
            candidates.truncate(k);
            candidates
        }
        PivotStrategy::BottomM => {
            let bottom = |a: &PivotEntry, b: &PivotEntry| {
                a.confidence.total_cmp(&b.confidence).then(a.index.cmp(&b.index))
            };
            candidates.select_nth_unstable_by(k - 1, bottom);
            candidates.truncate(k);
            candidates
        }
        PivotStrategy::RandomM => rand::seq::index::sample(rng, candidates.len(), k)
            .into_iter()
            .map(|i| candidates[i])
            .collect(),
    };
    chosen.sort_by(rank_order);
    chosen
}

/// Source-side candidates: samples with true label `c`, scored by the
/// model's probability of `c`.
fn source_candidates(probs: &Tensor, labels: &[usize], num_classes: usize) -> Vec<Vec<PivotEntry>> {
    let mut by_class = alloc::vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(PivotEntry {
            index: i,
            confidence: probs.get(i, y),
        });
    }
    by_class
}

/// Target-side candidates: samples pseudo-labelled `c`, scored by their
/// max probability.
fn target_candidates(probs: &Tensor, num_classes: usize) -> Vec<Vec<PivotEntry>> {
    let (labels, conf) = pseudo_label_from_probs(probs);
    let mut by_class = alloc::vec![Vec::new(); num_classes];
    for (i, (&c, &p)) in labels.iter().zip(&conf).enumerate() {
        by_class[c].push(PivotEntry {
            index: i,
            confidence: p,
        });
    }
    by_class
}

/// Builds a pivot set from precomputed class probabilities.
pub fn select_pivot_from_probs<R: Rng + ?Sized>(
    source_probs: &Tensor,
    source_labels: &[usize],
    target_probs: &Tensor,
    m: usize,
    strategy: PivotStrategy,
    rng: &mut R,
) -> Result<PivotSet> {
    if m == 0 {
        return Err(Error::InvalidConfig(String::from("pivot size m must be >= 1")));
    }
    let num_classes = source_probs.cols();
    if target_probs.cols() != num_classes || source_labels.len() != source_probs.rows() {
        return Err(Error::ShapeMismatch {
            op: "select_pivot",
            left: source_probs.shape().to_vec(),
            right: target_probs.shape().to_vec(),
        });
    }
    if let Some(&bad) = source_labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::LabelOutOfRange { label: bad, num_classes });
    }
    let mut warnings = Vec::new();
    let mut pick = |domain: Domain, candidates: Vec<Vec<PivotEntry>>| -> Vec<Vec<PivotEntry>> {
        candidates
            .into_iter()
            .enumerate()
            .map(|(class, c)| {
                if c.is_empty() {
                    log::warn!("no {} pivot candidates for class {class}", domain.name());
                    warnings.push(PivotWarning { domain, class });
                }
                select_class(c, m, strategy, rng)
            })
            .collect()
    };
    let source_by_class = pick(Domain::Source, source_candidates(source_probs, source_labels, num_classes));
    let target_by_class = pick(Domain::Target, target_candidates(target_probs, num_classes));
    Ok(PivotSet {
        m,
        source_by_class,
        target_by_class,
        warnings,
    })
}

/// Runs the main model over both domains and builds the pivot set.
pub fn select_pivot<R: Rng + ?Sized>(
    params: &NetworkParams,
    source_x: &Tensor,
    source_labels: &[usize],
    target_x: &Tensor,
    m: usize,
    strategy: PivotStrategy,
    rng: &mut R,
) -> Result<PivotSet> {
    let sp = class_probabilities(params, source_x)?;
    let tp = class_probabilities(params, target_x)?;
    select_pivot_from_probs(&sp, source_labels, &tp, m, strategy, rng)
}
