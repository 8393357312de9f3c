//! Oracle suites shared by the integration tests of this crate and the
//! acceptance target of the `tan` crate. Every suite returns measurements
//! rather than asserting, so callers can report them.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tan_core::autodiff::{Graph, Var};
use tan_core::evaluation::{compute_prf, roc_auc};
use tan_core::gradcheck::{self, GradCheck, DEFAULT_STEP};
use tan_core::networks::{BoundMlp, HiddenActivation, Mlp, MlpSpec, OutputActivation};
use tan_core::objectives::{
    classification_loss, domain_adversarial_loss, feature_critic_loss_from_features, task_semantic_loss,
    AdaptorVariant, CriticActivation, Reversal,
};
use tan_core::pivot::{select_pivot_from_probs, PivotEntry, PivotStrategy};
use tan_core::{Result, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| r.random_range(lo..hi)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Uniform values whose pairwise gaps and distance from `avoid` all exceed
/// `gap`, so no finite-difference probe crosses a kink.
fn spaced(r: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64, gap: f64, avoid: &[f64]) -> Tensor {
    loop {
        let t = uniform(r, rows, cols, lo, hi);
        let mut v = t.data().to_vec();
        v.sort_by(f64::total_cmp);
        let distinct = v.windows(2).all(|w| w[1] - w[0] > gap);
        let clear = v.iter().all(|x| avoid.iter().all(|a| (x - a).abs() > gap));
        if distinct && clear {
            return t;
        }
    }
}

/// `sum(out ⊙ w)` for a fixed random `w`, turning any output into a scalar
/// whose gradient exercises every output entry.
fn contract(g: &mut Graph, out: Var, w: &Tensor) -> Result<Var> {
    let wv = g.constant(w.clone());
    let p = g.mul(out, wv)?;
    Ok(g.sum(p))
}

fn weights_like(r: &mut impl Rng, shape: &[usize]) -> Tensor {
    let rows = shape[0];
    let cols: usize = shape[1..].iter().product();
    uniform(r, rows, cols, -2.0, 2.0)
}

/// One primitive: builds its inputs and returns the check on them.
type Case = fn(&mut ChaCha8Rng) -> Result<GradCheck>;

fn dims(r: &mut impl Rng) -> (usize, usize) {
    (r.random_range(1..5), r.random_range(1..5))
}

fn unary_case(r: &mut ChaCha8Rng, x: Tensor, op: fn(&mut Graph, Var) -> Var) -> Result<GradCheck> {
    let mut g = Graph::new();
    let probe = g.constant(x.clone());
    let y = op(&mut g, probe);
    let w = weights_like(r, g.value(y).shape());
    gradcheck::check(&[x], DEFAULT_STEP, |g, v| {
        let y = op(g, v[0]);
        contract(g, y, &w)
    })
}

fn binary_case(
    r: &mut ChaCha8Rng,
    a: Tensor,
    b: Tensor,
    op: fn(&mut Graph, Var, Var) -> Result<Var>,
) -> Result<GradCheck> {
    let mut g = Graph::new();
    let (pa, pb) = (g.constant(a.clone()), g.constant(b.clone()));
    let y = op(&mut g, pa, pb)?;
    let w = weights_like(r, g.value(y).shape());
    gradcheck::check(&[a, b], DEFAULT_STEP, |g, v| {
        let y = op(g, v[0], v[1])?;
        contract(g, y, &w)
    })
}

pub fn primitive_cases() -> Vec<(&'static str, Case)> {
    vec![
        ("matmul", |r| {
            let (n, k) = dims(r);
            let m = r.random_range(1..5);
            let (a, b) = (uniform(r, n, k, -2.0, 2.0), uniform(r, k, m, -2.0, 2.0));
            binary_case(r, a, b, |g, a, b| g.matmul(a, b))
        }),
        ("add_row", |r| {
            let (n, m) = dims(r);
            let (a, b) = (uniform(r, n, m, -2.0, 2.0), uniform(r, 1, m, -2.0, 2.0));
            binary_case(r, a, b, |g, a, b| g.add_row(a, b))
        }),
        ("add", |r| {
            let (n, m) = dims(r);
            let (a, b) = (uniform(r, n, m, -2.0, 2.0), uniform(r, n, m, -2.0, 2.0));
            binary_case(r, a, b, |g, a, b| g.add(a, b))
        }),
        ("sub", |r| {
            let (n, m) = dims(r);
            let (a, b) = (uniform(r, n, m, -2.0, 2.0), uniform(r, n, m, -2.0, 2.0));
            binary_case(r, a, b, |g, a, b| g.sub(a, b))
        }),
        ("mul", |r| {
            let (n, m) = dims(r);
            let (a, b) = (uniform(r, n, m, -2.0, 2.0), uniform(r, n, m, -2.0, 2.0));
            binary_case(r, a, b, |g, a, b| g.mul(a, b))
        }),
        ("affine", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.affine(x, -1.75, 0.5))
        }),
        ("scale", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.scale(x, 2.5))
        }),
        ("tanh", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.tanh(x))
        }),
        ("sigmoid", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.sigmoid(x))
        }),
        ("relu", |r| {
            let (n, m) = dims(r);
            let x = spaced(r, n, m, -2.0, 2.0, 1e-3, &[0.0]);
            unary_case(r, x, |g, x| g.relu(x))
        }),
        ("softplus", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.softplus(x))
        }),
        ("log", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, 0.2, 2.0);
            unary_case(r, x, |g, x| g.log(x))
        }),
        ("clamp", |r| {
            let (n, m) = dims(r);
            let x = spaced(r, n, m, -2.0, 2.0, 1e-3, &[-1.0, 1.0]);
            unary_case(r, x, |g, x| g.clamp(x, -1.0, 1.0))
        }),
        ("softmax_rows", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.softmax_rows(x))
        }),
        ("sum", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.sum(x))
        }),
        ("mean", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.mean(x))
        }),
        ("mean_rows", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.mean_rows(x))
        }),
        ("mean_cols", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.mean_cols(x))
        }),
        ("max", |r| {
            let (n, m) = dims(r);
            let x = spaced(r, n, m, -2.0, 2.0, 1e-3, &[]);
            unary_case(r, x, |g, x| g.max(x))
        }),
        ("min", |r| {
            let (n, m) = dims(r);
            let x = spaced(r, n, m, -2.0, 2.0, 1e-3, &[]);
            unary_case(r, x, |g, x| g.min(x))
        }),
        ("pairwise_sq_dist", |r| {
            let (n, d) = dims(r);
            let k = r.random_range(1..5);
            let (a, b) = (uniform(r, n, d, -2.0, 2.0), uniform(r, k, d, -2.0, 2.0));
            binary_case(r, a, b, |g, a, b| g.pairwise_sq_dist(a, b))
        }),
        ("flatten", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            unary_case(r, x, |g, x| g.flatten(x))
        }),
        ("concat", |r| {
            let (m1, m2) = dims(r);
            let (a, b) = (uniform(r, 1, m1, -2.0, 2.0), uniform(r, 1, m2, -2.0, 2.0));
            binary_case(r, a, b, |g, a, b| g.concat(&[a, b, a]))
        }),
        ("sort", |r| {
            let m = r.random_range(1..9);
            let x = spaced(r, 1, m, -2.0, 2.0, 1e-3, &[]);
            unary_case(r, x, |g, x| g.sort(x))
        }),
        ("pick", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            let cols: Vec<usize> = (0..n).map(|_| r.random_range(0..m)).collect();
            let w = uniform(r, n, 1, -2.0, 2.0);
            gradcheck::check(&[x], DEFAULT_STEP, |g, v| {
                let y = g.pick(v[0], &cols)?;
                contract(g, y, &w)
            })
        }),
        ("grad_reverse", |r| {
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            let w = uniform(r, n, m, -2.0, 2.0);
            gradcheck::check_signed(&[x], &[-1.0], DEFAULT_STEP, |g, v| {
                let y = g.grad_reverse(v[0]);
                contract(g, y, &w)
            })
        }),
        ("diamond", |r| {
            // x feeds both branches; the reverse pass must add their gradients
            let (n, m) = dims(r);
            let x = uniform(r, n, m, -2.0, 2.0);
            let w = uniform(r, n, m, -2.0, 2.0);
            gradcheck::check(&[x], DEFAULT_STEP, |g, v| {
                let a = g.tanh(v[0]);
                let b = g.mul(v[0], v[0])?;
                let y = g.add(a, b)?;
                contract(g, y, &w)
            })
        }),
    ]
}

/// Random MLP with nonzero biases.
pub fn random_mlp(r: &mut ChaCha8Rng, widths: &[usize], hidden: HiddenActivation, output: OutputActivation) -> Mlp {
    let spec = MlpSpec::new(widths.to_vec(), hidden, output).unwrap();
    let mut mlp = Mlp::init(spec, r).unwrap();
    for l in &mut mlp.layers {
        for b in l.bias.data_mut() {
            *b = r.random_range(-0.5..0.5);
        }
    }
    mlp
}

/// Rebinds an MLP onto graph leaves created by the checker.
fn bound_from(mlp: &Mlp, vars: &[Var]) -> BoundMlp {
    BoundMlp {
        spec: mlp.spec.clone(),
        weights: vars.iter().step_by(2).copied().collect(),
        biases: vars.iter().skip(1).step_by(2).copied().collect(),
    }
}

fn tensors(mlps: &[&Mlp]) -> Vec<Tensor> {
    mlps.iter().flat_map(|m| m.tensors().cloned()).collect()
}

fn feature_net(r: &mut ChaCha8Rng, d: usize, h: usize) -> Mlp {
    random_mlp(r, &[d, 5, h], HiddenActivation::Relu, OutputActivation::Sigmoid)
}

pub fn loss_cases() -> Vec<(&'static str, Case)> {
    vec![
        ("L_cls", |r| {
            let (d, h, c, b) = (3, 4, r.random_range(2..4), r.random_range(2..6));
            let phi = feature_net(r, d, h);
            let psi = random_mlp(r, &[h, c], HiddenActivation::Relu, OutputActivation::Softmax);
            let x = uniform(r, b, d, -2.0, 2.0);
            let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..c)).collect();
            let split = phi.tensors().count();
            gradcheck::check(&tensors(&[&phi, &psi]), DEFAULT_STEP, |g, v| {
                let xv = g.constant(x.clone());
                let f = bound_from(&phi, &v[..split]).forward(g, xv)?;
                let p = bound_from(&psi, &v[split..]).forward(g, f)?;
                classification_loss(g, p, &labels)
            })
        }),
        ("L_feat through GRL", |r| {
            let (d, h) = (3, 4);
            let (bs, bt) = (r.random_range(2..5), r.random_range(2..5));
            let phi = feature_net(r, d, h);
            let omega = random_mlp(r, &[h, 3, 1], HiddenActivation::Relu, OutputActivation::Sigmoid);
            let xs = uniform(r, bs, d, -2.0, 2.0);
            let xt = uniform(r, bt, d, -2.0, 2.0);
            let split = phi.tensors().count();
            let inputs = tensors(&[&phi, &omega]);
            // φ sees the reversed gradient, ω the plain one
            let signs: Vec<f64> = (0..inputs.len()).map(|i| if i < split { -1.0 } else { 1.0 }).collect();
            gradcheck::check_signed(&inputs, &signs, DEFAULT_STEP, |g, v| {
                let phi_b = bound_from(&phi, &v[..split]);
                let (sv, tv) = (g.constant(xs.clone()), g.constant(xt.clone()));
                let fs = phi_b.forward(g, sv)?;
                let ft = phi_b.forward(g, tv)?;
                domain_adversarial_loss(g, &bound_from(&omega, &v[split..]), fs, ft, Reversal::Enabled)
            })
        }),
        ("L_task literal", |r| task_case(r, AdaptorVariant::Literal)),
        ("L_task pooled", |r| task_case(r, AdaptorVariant::Pooled)),
        ("L_val", |r| {
            let variant = if r.random_bool(0.5) { AdaptorVariant::Literal } else { AdaptorVariant::Pooled };
            let sigma = CriticActivation::ALL[r.random_range(0..CriticActivation::ALL.len())];
            let (n, h) = (r.random_range(2..4), 3);
            let theta = random_mlp(r, &[variant.input_width(n, n), 4, 1], HiddenActivation::Tanh, OutputActivation::Identity);
            let old = (uniform(r, n, h, 0.0, 1.0), uniform(r, n, h, 0.0, 1.0));
            let new = (uniform(r, n, h, 0.0, 1.0), uniform(r, n, h, 0.0, 1.0));
            gradcheck::check(&tensors(&[&theta]), DEFAULT_STEP, |g, v| {
                feature_critic_loss_from_features(
                    g,
                    &bound_from(&theta, v),
                    variant,
                    sigma,
                    (&old.0, &old.1),
                    (&new.0, &new.1),
                )
            })
        }),
    ]
}

fn task_case(r: &mut ChaCha8Rng, variant: AdaptorVariant) -> Result<GradCheck> {
    let (d, h) = (3, 4);
    let (bs, bt) = (r.random_range(2..4), r.random_range(2..4));
    let phi = feature_net(r, d, h);
    let theta = random_mlp(r, &[variant.input_width(bs, bt), 5, 1], HiddenActivation::Tanh, OutputActivation::Identity);
    let xs = uniform(r, bs, d, -2.0, 2.0);
    let xt = uniform(r, bt, d, -2.0, 2.0);
    let split = phi.tensors().count();
    gradcheck::check(&tensors(&[&phi, &theta]), DEFAULT_STEP, |g, v| {
        let phi_b = bound_from(&phi, &v[..split]);
        let (sv, tv) = (g.constant(xs.clone()), g.constant(xt.clone()));
        let fs = phi_b.forward(g, sv)?;
        let ft = phi_b.forward(g, tv)?;
        task_semantic_loss(g, &bound_from(&theta, &v[split..]), variant, fs, ft)
    })
}

/// Worst relative error of `case` over `configs` random configurations.
pub fn run_case(name: &str, case: Case, configs: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..configs)
        .map(|i| {
            let report = case(&mut r).unwrap_or_else(|e| panic!("{name} config {i}: {e}"));
            report.max_relative_error
        })
        .fold(0.0, f64::max)
}

/// GRL contract on a random feature extractor and discriminator:
/// (forward values bit-identical, max |∇φ(GRL) + ∇φ(plain)|).
pub fn grl_contract(seed: u64) -> (bool, f64) {
    let mut r = rng(seed);
    let phi = feature_net(&mut r, 3, 4);
    let omega = random_mlp(&mut r, &[4, 3, 1], HiddenActivation::Relu, OutputActivation::Sigmoid);
    let xs = uniform(&mut r, 5, 3, -2.0, 2.0);
    let xt = uniform(&mut r, 4, 3, -2.0, 2.0);
    let run = |rev: Reversal| {
        let mut g = Graph::new();
        let p = phi.bind(&mut g, true);
        let o = omega.bind(&mut g, true);
        let (sv, tv) = (g.constant(xs.clone()), g.constant(xt.clone()));
        let fs = p.forward(&mut g, sv).unwrap();
        let ft = p.forward(&mut g, tv).unwrap();
        let l = domain_adversarial_loss(&mut g, &o, fs, ft, rev).unwrap();
        let grads = g.backward(l).unwrap();
        (g.value(l).item(), p.gradients(&g, &grads), o.gradients(&g, &grads))
    };
    let (v_rev, phi_rev, omega_rev) = run(Reversal::Enabled);
    let (v_plain, phi_plain, omega_plain) = run(Reversal::Disabled);
    let mut forward_exact = v_rev.to_bits() == v_plain.to_bits();
    let mut g = Graph::new();
    let x = g.param(xs.clone());
    let y = g.grad_reverse(x);
    forward_exact &= g.value(y) == &xs;

    let mut worst: f64 = 0.0;
    for (a, b) in phi_rev.iter().zip(&phi_plain) {
        for (x, y) in a.data().iter().zip(b.data()) {
            worst = worst.max((x + y).abs());
        }
    }
    // ω is upstream of no reversal, so its gradient must not change
    for (a, b) in omega_rev.iter().zip(&omega_plain) {
        for (x, y) in a.data().iter().zip(b.data()) {
            worst = worst.max((x - y).abs());
        }
    }
    (forward_exact, worst)
}

fn adaptor_value(theta: &Mlp, variant: AdaptorVariant, fs: &Tensor, ft: &Tensor) -> f64 {
    let mut g = Graph::new();
    let t = theta.bind(&mut g, false);
    let (s, u) = (g.constant(fs.clone()), g.constant(ft.clone()));
    let l = task_semantic_loss(&mut g, &t, variant, s, u).unwrap();
    g.value(l).item()
}

fn permute_cols(t: &Tensor, perm: &[usize]) -> Tensor {
    let data = (0..t.rows())
        .flat_map(|i| perm.iter().map(move |&j| t.get(i, j)))
        .collect();
    Tensor::matrix(t.rows(), t.cols(), data).unwrap()
}

fn permute_rows(t: &Tensor, perm: &[usize]) -> Tensor {
    t.select_rows(perm).unwrap()
}

/// Max |Δ| of the literal adaptor score under `trials` common permutations
/// of the feature coordinates.
pub fn literal_feature_permutation(trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let (bs, bt, h) = (4, 3, 6);
    let theta = random_mlp(&mut r, &[bs * bt, 8, 1], HiddenActivation::Relu, OutputActivation::Identity);
    let fs = uniform(&mut r, bs, h, 0.0, 1.0);
    let ft = uniform(&mut r, bt, h, 0.0, 1.0);
    let base = adaptor_value(&theta, AdaptorVariant::Literal, &fs, &ft);
    (0..trials)
        .map(|_| {
            let mut perm: Vec<usize> = (0..h).collect();
            perm.shuffle(&mut r);
            let v = adaptor_value(&theta, AdaptorVariant::Literal, &permute_cols(&fs, &perm), &permute_cols(&ft, &perm));
            (v - base).abs()
        })
        .fold(0.0, f64::max)
}

/// Max |Δ| of the pooled adaptor score under `trials` independent row
/// permutations of the source and target features.
pub fn pooled_sample_permutation(trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let (bs, bt, h) = (5, 4, 6);
    let width = AdaptorVariant::Pooled.input_width(bs, bt);
    let theta = random_mlp(&mut r, &[width, 8, 1], HiddenActivation::Relu, OutputActivation::Identity);
    let fs = uniform(&mut r, bs, h, 0.0, 1.0);
    let ft = uniform(&mut r, bt, h, 0.0, 1.0);
    let base = adaptor_value(&theta, AdaptorVariant::Pooled, &fs, &ft);
    (0..trials)
        .map(|_| {
            let mut ps: Vec<usize> = (0..bs).collect();
            let mut pt: Vec<usize> = (0..bt).collect();
            ps.shuffle(&mut r);
            pt.shuffle(&mut r);
            let v = adaptor_value(&theta, AdaptorVariant::Pooled, &permute_rows(&fs, &ps), &permute_rows(&ft, &pt));
            (v - base).abs()
        })
        .fold(0.0, f64::max)
}

/// Tallies of the confusion matrix by direct enumeration.
fn brute_counts(pred: &[usize], labels: &[usize], positive: usize) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
    for (&p, &y) in pred.iter().zip(labels) {
        match (p == positive, y == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    (tp, fp, tn, fneg)
}

/// Max deviation of compute_prf from the brute-force counts over random
/// instances of up to `max_n` samples.
pub fn prf_vs_brute_force(instances: usize, max_n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = r.random_range(1..=max_n);
        let rate = r.random_range(0.0..1.0);
        let labels: Vec<usize> = (0..n).map(|_| usize::from(r.random_bool(rate))).collect();
        let pred: Vec<usize> = (0..n).map(|_| usize::from(r.random_bool(0.5))).collect();
        let rep = compute_prf(&pred, &labels, 1).unwrap();
        let (tp, fp, tn, fneg) = brute_counts(&pred, &labels, 1);
        let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p = div(tp, tp + fp);
        let rc = div(tp, tp + fneg);
        let f1 = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
        let acc = div(tp + tn, n);
        let c = rep.confusion;
        if (c.tp, c.fp, c.tn, c.r#fn) != (tp, fp, tn, fneg) {
            return f64::INFINITY;
        }
        for (a, b) in [(rep.precision, p), (rep.recall, rc), (rep.f1, f1), (rep.accuracy, acc)] {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Max |roc_auc − pair statistic| over random instances with ties.
pub fn auc_vs_brute_force(instances: usize, max_n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = r.random_range(2..=max_n);
        let mut labels: Vec<usize> = (0..n).map(|_| usize::from(r.random_bool(0.4))).collect();
        labels[0] = 0;
        labels[1] = 1;
        // coarse grid of scores so ties are common
        let levels = r.random_range(2..50) as f64;
        let scores: Vec<f64> = (0..n).map(|_| (r.random_range(0.0f64..1.0) * levels).floor() / levels).collect();
        let (mut pairs, mut wins) = (0usize, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        let brute = wins / pairs as f64;
        let auc = roc_auc(&scores, &labels, 1).unwrap();
        worst = worst.max((auc - brute).abs());
    }
    worst
}

/// Full-sort reference selection of one class.
fn brute_select(cands: &[PivotEntry], m: usize, strategy: PivotStrategy, r: &mut ChaCha8Rng) -> Vec<PivotEntry> {
    let rank = |a: &PivotEntry, b: &PivotEntry| b.confidence.total_cmp(&a.confidence).then(a.index.cmp(&b.index));
    let k = m.min(cands.len());
    let mut chosen: Vec<PivotEntry> = match strategy {
        PivotStrategy::TopM => {
            let mut all = cands.to_vec();
            all.sort_by(rank);
            all.truncate(k);
            all
        }
        PivotStrategy::BottomM => {
            let mut all = cands.to_vec();
            all.sort_by(|a, b| a.confidence.total_cmp(&b.confidence).then(a.index.cmp(&b.index)));
            all.truncate(k);
            all
        }
        PivotStrategy::RandomM if k == cands.len() => cands.to_vec(),
        PivotStrategy::RandomM => rand::seq::index::sample(r, cands.len(), k)
            .into_iter()
            .map(|i| cands[i])
            .collect(),
    };
    chosen.sort_by(rank);
    chosen
}

fn random_probs(r: &mut ChaCha8Rng, n: usize, classes: usize, skew: f64) -> Tensor {
    let mut data = Vec::with_capacity(n * classes);
    for _ in 0..n {
        // coarse values so confidence ties occur
        let mut row: Vec<f64> = (0..classes).map(|_| (r.random_range(0.0f64..1.0) * 20.0).floor() + 1.0).collect();
        row[0] *= skew;
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|v| v / s));
    }
    Tensor::matrix(n, classes, data).unwrap()
}

/// Number of random instances on which `strategy` disagrees with the
/// full-sort reference. Class balance is skewed so some classes fall short
/// of `m` or are empty.
pub fn pivot_vs_brute_force(strategy: PivotStrategy, instances: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let mut mismatches = 0;
    for _ in 0..instances {
        let classes = r.random_range(2..4);
        let ns = r.random_range(1..=1000);
        let nt = r.random_range(1..=1000);
        let m = r.random_range(1..=32);
        let skew = [1.0, 5.0, 50.0][r.random_range(0..3)];
        let sp = random_probs(&mut r, ns, classes, 1.0);
        let tp = random_probs(&mut r, nt, classes, skew);
        let rare = r.random_range(0..classes);
        let labels: Vec<usize> = (0..ns)
            .map(|_| {
                if r.random_bool(0.02) {
                    rare
                } else {
                    r.random_range(0..classes)
                }
            })
            .collect();
        let draw_seed: u64 = r.random();

        let mut draw = rng(draw_seed);
        let got = select_pivot_from_probs(&sp, &labels, &tp, m, strategy, &mut draw).unwrap();

        let mut draw = rng(draw_seed);
        let mut src = vec![Vec::new(); classes];
        for (i, &y) in labels.iter().enumerate() {
            src[y].push(PivotEntry { index: i, confidence: sp.get(i, y) });
        }
        let mut tgt = vec![Vec::new(); classes];
        for i in 0..nt {
            let row = tp.row(i);
            let mut best = 0;
            for c in 1..classes {
                if row[c] > row[best] {
                    best = c;
                }
            }
            tgt[best].push(PivotEntry { index: i, confidence: row[best] });
        }
        let want_s: Vec<Vec<PivotEntry>> = src.iter().map(|c| brute_select(c, m, strategy, &mut draw)).collect();
        let want_t: Vec<Vec<PivotEntry>> = tgt.iter().map(|c| brute_select(c, m, strategy, &mut draw)).collect();
        if got.source_by_class != want_s || got.target_by_class != want_t {
            mismatches += 1;
        }
    }
    mismatches
}
