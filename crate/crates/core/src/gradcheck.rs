//! Central finite-difference check of reverse-mode gradients.

use alloc::vec::Vec;

use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Step used by [`check`] when none is given.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Magnitude below which errors are measured absolutely rather than
/// relative to the gradient.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// `|a − b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Largest disagreement found by [`check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// `(input, element)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries: usize,
}

/// Compares the gradient of `f` at `inputs` against central differences
/// with step `h` on every input element.
///
/// `f` receives a fresh graph and one trainable leaf per input and must
/// return a scalar.
pub fn check<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let signs = alloc::vec![1.0; inputs.len()];
    check_signed(inputs, &signs, h, f)
}

/// Like [`check`], but the analytic gradient of input `i` is expected to
/// equal `signs[i]` times the numeric one. A sign of `-1` checks inputs
/// that reach the output through a gradient reversal.
pub fn check_signed<F>(inputs: &[Tensor], signs: &[f64], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    assert_eq!(signs.len(), inputs.len(), "one sign per input");
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.param(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        entries: 0,
    };
    let mut probe = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*v, &inputs[i]);
        for j in 0..inputs[i].numel() {
            let x = inputs[i].data()[j];
            probe[i].data_mut()[j] = x + h;
            let up = eval(&probe)?;
            probe[i].data_mut()[j] = x - h;
            let down = eval(&probe)?;
            probe[i].data_mut()[j] = x;

            let numeric = signs[i] * (up - down) / (2.0 * h);
            let a = analytic.data()[j];
            let err = relative_error(a, numeric);
            report.entries += 1;
            if err > report.max_relative_error || report.entries == 1 {
                report.max_relative_error = err;
                report.worst = (i, j);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
