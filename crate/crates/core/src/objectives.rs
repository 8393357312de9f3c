//! Training objectives: classification cross-entropy, the domain-adversarial
//! loss, the Gram-matrix task semantic loss, their weighted total and the
//! feature-critic loss that trains the adaptor.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::networks::{AdaptorParams, BoundMlp, BoundNetworks, NetworkParams};
use crate::tensor::Tensor;

/// Floor applied to probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Weights of the feature-adaptation and task-adaptation terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub mu: f64,
}

impl LossWeights {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let w = LossWeights { lambda, mu };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Activation applied to the critic difference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticActivation {
    #[default]
    Tanh,
    Sigmoid,
    Softplus,
    Relu,
}

impl CriticActivation {
    pub const ALL: [CriticActivation; 4] = [
        CriticActivation::Tanh,
        CriticActivation::Sigmoid,
        CriticActivation::Softplus,
        CriticActivation::Relu,
    ];

    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            CriticActivation::Tanh => g.tanh(x),
            CriticActivation::Sigmoid => g.sigmoid(x),
            CriticActivation::Softplus => g.softplus(x),
            CriticActivation::Relu => g.relu(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CriticActivation::Tanh => "tanh",
            CriticActivation::Sigmoid => "sigmoid",
            CriticActivation::Softplus => "softplus",
            CriticActivation::Relu => "relu",
        }
    }
}

/// How the cross-domain Gram matrix is presented to the adaptor MLP.
///
/// `Literal` flattens the full `Bs × Bt` matrix. `Pooled` feeds the sorted
/// row means, the sorted column means and the global mean, min and max
/// (`Bs + Bt + 3` values), which does not depend on the order of samples in
/// either batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptorVariant {
    #[default]
    Literal,
    Pooled,
}

impl AdaptorVariant {
    pub fn input_width(self, source_rows: usize, target_rows: usize) -> usize {
        match self {
            AdaptorVariant::Literal => source_rows * target_rows,
            AdaptorVariant::Pooled => source_rows + target_rows + 3,
        }
    }
}

/// Mean cross-entropy of `probs` (`[B, classes]`, rows summing to one)
/// against integer labels.
pub fn classification_loss(g: &mut Graph, probs: Var, labels: &[usize]) -> Result<Var> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let picked = g.pick(probs, labels)?;
    let clamped = clamp_count(g, picked);
    if clamped > 0 {
        log::warn!("classification loss: {clamped} true-class probabilities clamped to {PROB_EPS}");
    }
    let safe = g.clamp(picked, PROB_EPS, 1.0);
    let logp = g.log(safe);
    let m = g.mean(logp);
    Ok(g.scale(m, -1.0))
}

fn clamp_count(g: &Graph, x: Var) -> usize {
    g.value(x)
        .data()
        .iter()
        .filter(|&&p| p < PROB_EPS)
        .count()
}

/// Whether the discriminator sees features through a gradient reversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reversal {
    Enabled,
    Disabled,
}

/// Binary cross-entropy of the discriminator with source labelled 1 and
/// target labelled 0: `-mean log D(Fs) - mean log(1 - D(Ft))`.
///
/// With [`Reversal::Enabled`] the features pass through a gradient reversal
/// first, so one backward pass trains the discriminator to separate domains
/// and the feature extractor to confuse it.
pub fn domain_adversarial_loss(
    g: &mut Graph,
    omega: &BoundMlp,
    source_features: Var,
    target_features: Var,
    reversal: Reversal,
) -> Result<Var> {
    let (fs, ft) = match reversal {
        Reversal::Enabled => (g.grad_reverse(source_features), g.grad_reverse(target_features)),
        Reversal::Disabled => (source_features, target_features),
    };
    let ds = omega.forward(g, fs)?;
    let dt = omega.forward(g, ft)?;
    let ds = g.clamp(ds, PROB_EPS, 1.0 - PROB_EPS);
    let dt = g.clamp(dt, PROB_EPS, 1.0 - PROB_EPS);
    let log_ds = g.log(ds);
    let src_term = g.mean(log_ds);
    let one_minus = g.affine(dt, -1.0, 1.0);
    let log_dt = g.log(one_minus);
    let tgt_term = g.mean(log_dt);
    let s = g.add(src_term, tgt_term)?;
    Ok(g.scale(s, -1.0))
}

/// Flattened row-major matrix of squared distances between every source
/// row and every target row, shape `[1, Bs·Bt]`.
pub fn gram_features(g: &mut Graph, source_features: Var, target_features: Var) -> Result<Var> {
    let gram = g.pairwise_sq_dist(source_features, target_features)?;
    Ok(g.flatten(gram))
}

/// Adaptor input for the chosen variant.
pub fn adaptor_input(
    g: &mut Graph,
    variant: AdaptorVariant,
    source_features: Var,
    target_features: Var,
) -> Result<Var> {
    match variant {
        AdaptorVariant::Literal => gram_features(g, source_features, target_features),
        AdaptorVariant::Pooled => {
            let gram = g.pairwise_sq_dist(source_features, target_features)?;
            let rows = g.mean_rows(gram);
            let rows = g.sort(rows);
            let cols = g.mean_cols(gram);
            let cols = g.sort(cols);
            let mean = g.mean(gram);
            let min = g.min(gram);
            let max = g.max(gram);
            g.concat(&[rows, cols, mean, min, max])
        }
    }
}

/// Scalar adaptor score of a source/target feature pair.
pub fn task_semantic_loss(
    g: &mut Graph,
    theta: &BoundMlp,
    variant: AdaptorVariant,
    source_features: Var,
    target_features: Var,
) -> Result<Var> {
    let input = adaptor_input(g, variant, source_features, target_features)?;
    let out = theta.forward(g, input)?;
    Ok(g.sum(out))
}

/// One mini-batch pair. Source rows carry labels; target rows do not.
#[derive(Clone, Debug)]
pub struct DomainBatch {
    pub source: Tensor,
    pub source_labels: Vec<usize>,
    pub target: Tensor,
}

/// Graph handles of the total objective and each of its terms. Terms whose
/// weight is zero are not built at all.
#[derive(Clone, Copy, Debug)]
pub struct TotalLoss {
    pub total: Var,
    pub cls: Var,
    pub feat: Option<Var>,
    pub task: Option<Var>,
}

/// Values of the objective terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub feat: f64,
    pub task: f64,
    pub total: f64,
}

impl TotalLoss {
    pub fn breakdown(&self, g: &Graph) -> LossBreakdown {
        LossBreakdown {
            cls: g.value(self.cls).item(),
            feat: self.feat.map_or(0.0, |v| g.value(v).item()),
            task: self.task.map_or(0.0, |v| g.value(v).item()),
            total: g.value(self.total).item(),
        }
    }
}

/// `L = L_cls + λ·L_feat + μ·L_task` on one batch pair.
///
/// `theta` must be supplied whenever `μ > 0`. It may be bound as a constant,
/// in which case the task term still carries gradient into the feature
/// extractor but none into the adaptor.
pub fn total_loss(
    g: &mut Graph,
    net: &BoundNetworks,
    theta: Option<&BoundMlp>,
    variant: AdaptorVariant,
    weights: LossWeights,
    batch: &DomainBatch,
) -> Result<TotalLoss> {
    weights.validate()?;
    let xs = g.constant(batch.source.clone());
    let fs = net.phi.forward(g, xs)?;
    let probs = net.psi.forward(g, fs)?;
    let cls = classification_loss(g, probs, &batch.source_labels)?;
    let mut total = cls;

    let needs_target = weights.lambda > 0.0 || weights.mu > 0.0;
    let ft = if needs_target {
        let xt = g.constant(batch.target.clone());
        Some(net.phi.forward(g, xt)?)
    } else {
        None
    };

    let mut feat = None;
    if weights.lambda > 0.0 {
        let ft = ft.expect("built above");
        let l = domain_adversarial_loss(g, &net.omega, fs, ft, Reversal::Enabled)?;
        let weighted = g.scale(l, weights.lambda);
        total = g.add(total, weighted)?;
        feat = Some(l);
    }

    let mut task = None;
    if weights.mu > 0.0 {
        let theta = theta.ok_or_else(|| {
            Error::InvalidConfig(format!("mu = {} requires adaptor parameters", weights.mu))
        })?;
        let ft = ft.expect("built above");
        let l = task_semantic_loss(g, theta, variant, fs, ft)?;
        let weighted = g.scale(l, weights.mu);
        total = g.add(total, weighted)?;
        task = Some(l);
    }

    Ok(TotalLoss { total, cls, feat, task })
}

/// Source and target pivot rows aligned so that row `i` of each half has
/// the same class and within-class rank.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedPivot {
    pub source: Tensor,
    pub target: Tensor,
}

impl PairedPivot {
    pub fn new(source: Tensor, target: Tensor) -> Result<Self> {
        if source.rows() != target.rows() {
            return Err(Error::UnequalPivotHalves {
                source: source.rows(),
                target: target.rows(),
            });
        }
        Ok(PairedPivot { source, target })
    }
}

/// Pivot features under the given parameters, with no gradient attached.
pub fn pivot_features(params: &NetworkParams, pivot: &PairedPivot) -> Result<(Tensor, Tensor)> {
    Ok((params.forward_feature(&pivot.source)?, params.forward_feature(&pivot.target)?))
}

/// `mean σ(M_θ(features under Φ_new) − M_θ(features under Φ_old))` over the
/// pivot. Both feature pairs are constants; only `theta` receives gradient.
pub fn feature_critic_loss_from_features(
    g: &mut Graph,
    theta: &BoundMlp,
    variant: AdaptorVariant,
    sigma: CriticActivation,
    old: (&Tensor, &Tensor),
    new: (&Tensor, &Tensor),
) -> Result<Var> {
    for (s, t) in [old, new] {
        if s.rows() != t.rows() {
            return Err(Error::UnequalPivotHalves {
                source: s.rows(),
                target: t.rows(),
            });
        }
    }
    let score = |g: &mut Graph, (s, t): (&Tensor, &Tensor)| -> Result<Var> {
        let sv = g.constant(s.clone());
        let tv = g.constant(t.clone());
        let input = adaptor_input(g, variant, sv, tv)?;
        theta.forward(g, input)
    };
    let new_score = score(g, new)?;
    let old_score = score(g, old)?;
    let diff = g.sub(new_score, old_score)?;
    let act = sigma.apply(g, diff);
    Ok(g.mean(act))
}

/// Feature-critic loss on a paired pivot between the assist model
/// (`old`) and the updated main model (`new`).
pub fn feature_critic_loss(
    g: &mut Graph,
    theta: &BoundMlp,
    variant: AdaptorVariant,
    sigma: CriticActivation,
    pivot: &PairedPivot,
    old: &NetworkParams,
    new: &NetworkParams,
) -> Result<Var> {
    let (old_s, old_t) = pivot_features(old, pivot)?;
    let (new_s, new_t) = pivot_features(new, pivot)?;
    feature_critic_loss_from_features(g, theta, variant, sigma, (&old_s, &old_t), (&new_s, &new_t))
}

/// Adaptor score evaluated outside any training graph.
pub fn adaptor_score(
    adaptor: &AdaptorParams,
    variant: AdaptorVariant,
    source_features: &Tensor,
    target_features: &Tensor,
) -> Result<f64> {
    let mut g = Graph::new();
    let theta = adaptor.theta.bind(&mut g, false);
    let s = g.constant(source_features.clone());
    let t = g.constant(target_features.clone());
    let l = task_semantic_loss(&mut g, &theta, variant, s, t)?;
    Ok(g.value(l).item())
}
