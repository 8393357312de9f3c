use alloc::vec::Vec;

use crate::tensor::Tensor;

/// Decaying main learning rate `α·(1+γk)^(−υ)` at iteration `k`.
pub fn lr_schedule(alpha: f64, gamma: f64, upsilon: f64, k: u64) -> f64 {
    alpha * libm::pow(1.0 + gamma * k as f64, -upsilon)
}

/// SGD with Nesterov momentum in its look-ahead form:
///
/// ```text
/// v ← μ·v − α·∇f(w + μ·v)
/// w ← w + v
/// ```
///
/// Callers evaluate the gradient at [`NesterovSgd::lookahead`] and hand it
/// to [`NesterovSgd::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct NesterovSgd {
    momentum: f64,
    velocity: Vec<Tensor>,
}

impl NesterovSgd {
    pub fn new<'a>(momentum: f64, params: impl Iterator<Item = &'a Tensor>) -> Self {
        NesterovSgd {
            momentum,
            velocity: params.map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    /// Whether the look-ahead point differs from the parameters.
    pub fn has_lookahead(&self) -> bool {
        self.momentum != 0.0 && self.velocity.iter().any(|v| v.data().iter().any(|&x| x != 0.0))
    }

    /// Moves `params` to the look-ahead point `w + μ·v`.
    pub fn shift_to_lookahead<'a>(&self, params: impl Iterator<Item = &'a mut Tensor>) {
        for (p, v) in params.zip(&self.velocity) {
            p.axpy(self.momentum, v);
        }
    }

    /// Applies one update given gradients taken at the look-ahead point.
    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut Tensor>, grads: &[Tensor], lr: f64) {
        debug_assert_eq!(grads.len(), self.velocity.len());
        for ((p, v), g) in params.zip(self.velocity.iter_mut()).zip(grads) {
            for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
                *vi = self.momentum * *vi - lr * gi;
            }
            p.axpy(1.0, v);
        }
    }
}
