//! Binary classification metrics and the MMD distribution-distance diagnostic.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub confusion: Confusion,
    #[serde(skip, default = "default_positive")]
    pub positive_class: usize,
    /// Set when a zero denominator forced a metric to 0.
    #[serde(skip)]
    pub degenerate: bool,
}

fn default_positive() -> usize {
    1
}

/// `2PR / (P + R)`, zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall, F1 and accuracy of `predictions` against `labels`
/// with `positive_class` as the positive label. AUC is left unset.
pub fn compute_prf(predictions: &[usize], labels: &[usize], positive_class: usize) -> Result<MetricsReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "compute_prf",
            left: alloc::vec![predictions.len()],
            right: alloc::vec![labels.len()],
        });
    }
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == positive_class, y == positive_class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.r#fn += 1,
        }
    }
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.r#fn);
    let accuracy = (c.tp + c.tn) as f64 / c.total() as f64;
    Ok(MetricsReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        accuracy,
        auc: None,
        confusion: c,
        positive_class,
        degenerate,
    })
}

/// One operating point of a ROC curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC points from the strictest threshold down, starting at `(0, 0)`.
/// Samples with equal scores enter the curve together.
pub fn roc_curve(scores: &[f64], labels: &[usize], positive_class: usize) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "roc_curve",
            left: alloc::vec![scores.len()],
            right: alloc::vec![labels.len()],
        });
    }
    let pos = labels.iter().filter(|&&y| y == positive_class).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = alloc::vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&threshold) == Ordering::Equal {
            if labels[order[i]] == positive_class {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold,
        });
    }
    Ok(points)
}

/// Trapezoidal area under the ROC curve. Tied scores contribute a diagonal
/// segment, which equals counting tied positive/negative pairs as one half.
pub fn roc_auc(scores: &[f64], labels: &[usize], positive_class: usize) -> Result<f64> {
    let pts = roc_curve(scores, labels, positive_class)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    /// V-statistic, always nonnegative.
    #[default]
    Biased,
    /// U-statistic, unbiased but can dip below zero.
    Unbiased,
}

/// Gaussian kernel bandwidth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median pairwise distance over the pooled sample.
    #[default]
    Median,
    Fixed(f64),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median Euclidean distance over all distinct pairs of the pooled rows.
/// Falls back to 1 when every pair coincides.
pub fn median_pairwise_distance(a: &Tensor, b: &Tensor) -> f64 {
    let rows: Vec<&[f64]> = (0..a.rows()).map(|i| a.row(i)).chain((0..b.rows()).map(|i| b.row(i))).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(libm::sqrt(sq_dist(rows[i], rows[j])));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let n = d.len();
    let mid = n / 2;
    let (_, &mut upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if n % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Squared maximum mean discrepancy between the rows of `a` and `b` under a
/// Gaussian kernel `exp(-‖x−y‖² / 2σ²)`.
pub fn mmd(a: &Tensor, b: &Tensor, estimator: MmdEstimator, bandwidth: Bandwidth) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(Error::ShapeMismatch {
            op: "mmd",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (n, m) = (a.rows(), b.rows());
    if estimator == MmdEstimator::Unbiased && (n < 2 || m < 2) {
        return Err(Error::InvalidConfig(alloc::format!(
            "unbiased MMD needs at least 2 samples per side, got {n} and {m}"
        )));
    }
    let sigma = match bandwidth {
        Bandwidth::Median => median_pairwise_distance(a, b),
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => {
            return Err(Error::InvalidConfig(alloc::format!("bandwidth must be positive, got {s}")))
        }
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let k = |x: &[f64], y: &[f64]| libm::exp(-gamma * sq_dist(x, y));

    let within = |t: &Tensor, count: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..count {
            for j in 0..count {
                if i != j {
                    s += k(t.row(i), t.row(j));
                }
            }
        }
        s
    };
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..m {
            cross += k(a.row(i), b.row(j));
        }
    }
    let (saa, sbb) = (within(a, n), within(b, m));
    let (nf, mf) = (n as f64, m as f64);
    let value = match estimator {
        // the diagonal terms are k(x, x) = 1
        MmdEstimator::Biased => (saa + nf) / (nf * nf) + (sbb + mf) / (mf * mf) - 2.0 * cross / (nf * mf),
        MmdEstimator::Unbiased => saa / (nf * (nf - 1.0)) + sbb / (mf * (mf - 1.0)) - 2.0 * cross / (nf * mf),
    };
    Ok(match estimator {
        MmdEstimator::Biased => value.max(0.0),
        MmdEstimator::Unbiased => value,
    })
}
