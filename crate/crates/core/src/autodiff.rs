//! Define-by-run reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] records every operation applied to it together with the
//! computed value. [`Graph::backward`] walks the record in reverse and
//! accumulates gradients for every node that depends on a trainable leaf.
//! Graphs are cheap and meant to be rebuilt for every forward pass.
//!
//! All reductions run in a fixed sequential order so that two runs over the
//! same inputs produce bit-identical values and gradients.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: f64 },
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softplus(Var),
    SoftmaxRows(Var),
    Log(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    MeanCols(Var),
    Extremum { x: Var, at: usize },
    PairwiseSqDist(Var, Var),
    Flatten(Var),
    Concat(Vec<Var>),
    Sort { x: Var, order: Vec<usize> },
    Pick { x: Var, cols: Vec<usize> },
    GradReverse(Var),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Operation record for one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, if any flowed into it.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Gradient with respect to `var`, zeros (shaped like `like`) when none flowed.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

/// Squared distance between two rows with the per-coordinate terms summed in
/// ascending order, so the result depends only on the multiset of terms and
/// not on coordinate order.
fn sorted_sq_dist(a: &[f64], b: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)));
    scratch.sort_unstable_by(f64::total_cmp);
    scratch.iter().sum()
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf: gradients flow into it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Constant leaf: no gradient is computed for it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, op: Op, value: Tensor, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(op, value, rg)
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x).map(f);
        self.derived(op, value, &[x])
    }

    /// Matrix product of `[n, k]` and `[k, m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; n * m];
        let (da, db) = (ta.data(), tb.data());
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let s = da[i * k + p];
                if s == 0.0 {
                    continue;
                }
                let brow = &db[p * m..(p + 1) * m];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += s * bv;
                }
            }
        }
        let value = Tensor::matrix(n, m, out)?;
        Ok(self.derived(Op::MatMul(a, b), value, &[a, b]))
    }

    /// Adds a `[1, m]` row to every row of an `[n, m]` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (tx, tr) = (self.value(x), self.value(row));
        if tr.rows() != 1 || tr.cols() != tx.cols() {
            return Err(mismatch("add_row", tx, tr));
        }
        let m = tx.cols();
        let mut value = tx.clone();
        for chunk in value.data_mut().chunks_mut(m) {
            for (v, b) in chunk.iter_mut().zip(tr.data()) {
                *v += b;
            }
        }
        Ok(self.derived(Op::AddRow(x, row), value, &[x, row]))
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.derived(op, value, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.unary(x, |v| scale * v + shift, Op::Affine { x, scale })
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Var {
        self.affine(x, scale, 0.0)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, libm::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, softplus, Op::Softplus(x))
    }

    /// Natural log; callers clamp away from zero first.
    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, libm::log, Op::Log(x))
    }

    /// Elementwise clamp to `[lo, hi]`; gradient is zero where clamping bites.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, |v| v.clamp(lo, hi), Op::Clamp { x, lo, hi })
    }

    /// Numerically stable softmax over each row.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let m = tx.cols();
        let mut value = tx.clone();
        for row in value.data_mut().chunks_mut(m) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = libm::exp(*v - max);
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        self.derived(Op::SoftmaxRows(x), value, &[x])
    }

    /// Sum of all elements, as a `[1, 1]` scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.derived(Op::Sum(x), Tensor::scalar(s), &[x])
    }

    /// Mean of all elements, as a `[1, 1]` scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s: f64 = t.data().iter().sum();
        let value = Tensor::scalar(s / t.numel() as f64);
        self.derived(Op::Mean(x), value, &[x])
    }

    /// Mean across each row: `[n, m]` to `[n, 1]`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (n, m) = (t.rows(), t.cols());
        let data = (0..n).map(|i| t.row(i).iter().sum::<f64>() / m as f64).collect();
        let value = Tensor::matrix(n, 1, data).expect("row count is positive");
        self.derived(Op::MeanRows(x), value, &[x])
    }

    /// Mean down each column: `[n, m]` to `[1, m]`.
    pub fn mean_cols(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (n, m) = (t.rows(), t.cols());
        let mut data = vec![0.0; m];
        for i in 0..n {
            for (acc, v) in data.iter_mut().zip(t.row(i)) {
                *acc += v;
            }
        }
        for v in &mut data {
            *v /= n as f64;
        }
        let value = Tensor::matrix(1, m, data).expect("column count is positive");
        self.derived(Op::MeanCols(x), value, &[x])
    }

    fn extremum(&mut self, x: Var, want: Ordering) -> Var {
        let t = self.value(x);
        let mut at = 0;
        for (i, v) in t.data().iter().enumerate() {
            if v.total_cmp(&t.data()[at]) == want {
                at = i;
            }
        }
        let value = Tensor::scalar(t.data()[at]);
        self.derived(Op::Extremum { x, at }, value, &[x])
    }

    /// Largest element; the gradient goes to its first occurrence.
    pub fn max(&mut self, x: Var) -> Var {
        self.extremum(x, Ordering::Greater)
    }

    /// Smallest element; the gradient goes to its first occurrence.
    pub fn min(&mut self, x: Var) -> Var {
        self.extremum(x, Ordering::Less)
    }

    /// Squared Euclidean distances between the rows of `a: [n, d]` and
    /// `b: [k, d]`, as an `[n, k]` matrix.
    pub fn pairwise_sq_dist(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.cols() {
            return Err(mismatch("pairwise_sq_dist", ta, tb));
        }
        let (n, k) = (ta.rows(), tb.rows());
        let mut scratch = Vec::with_capacity(ta.cols());
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            for j in 0..k {
                data.push(sorted_sq_dist(ta.row(i), tb.row(j), &mut scratch));
            }
        }
        let value = Tensor::matrix(n, k, data)?;
        Ok(self.derived(Op::PairwiseSqDist(a, b), value, &[a, b]))
    }

    /// Reshapes to a `[1, numel]` row.
    pub fn flatten(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = t.clone().reshape(vec![1, t.numel()]).expect("same element count");
        self.derived(Op::Flatten(x), value, &[x])
    }

    /// Flattens every input and joins them into one `[1, total]` row.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::EmptyInput("concat inputs"));
        }
        let mut data = Vec::new();
        for &x in xs {
            data.extend_from_slice(self.value(x).data());
        }
        let value = Tensor::row_vector(data)?;
        Ok(self.derived(Op::Concat(xs.to_vec()), value, xs))
    }

    /// All elements in ascending order as a `[1, numel]` row. Ties keep
    /// their original relative order.
    pub fn sort(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mut order: Vec<usize> = (0..t.numel()).collect();
        order.sort_by(|&i, &j| t.data()[i].total_cmp(&t.data()[j]));
        let data = order.iter().map(|&i| t.data()[i]).collect();
        let value = Tensor::row_vector(data).expect("nonempty tensor");
        self.derived(Op::Sort { x, order }, value, &[x])
    }

    /// Picks `x[i, cols[i]]` from every row of `x`, giving `[n, 1]`.
    pub fn pick(&mut self, x: Var, cols: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if cols.len() != t.rows() {
            return Err(Error::ShapeMismatch {
                op: "pick",
                left: t.shape().to_vec(),
                right: vec![cols.len()],
            });
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= t.cols()) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                num_classes: t.cols(),
            });
        }
        let data = cols.iter().enumerate().map(|(i, &c)| t.get(i, c)).collect();
        let value = Tensor::matrix(cols.len(), 1, data)?;
        Ok(self.derived(Op::Pick { x, cols: cols.to_vec() }, value, &[x]))
    }

    /// Gradient reversal: identity forward, negated gradient backward.
    pub fn grad_reverse(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.derived(Op::GradReverse(x), value, &[x])
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::NonScalarLoss {
                shape: lt.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut send = |v: Var, contribution: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.axpy(1.0, &contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
                if self.nodes[a.0].requires_grad {
                    // dA = G · Bᵀ
                    let mut da = vec![0.0; n * k];
                    for i in 0..n {
                        let grow = &g.data()[i * m..(i + 1) * m];
                        for p in 0..k {
                            let brow = &tb.data()[p * m..(p + 1) * m];
                            da[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    send(*a, Tensor::matrix(n, k, da).expect("shape of a"));
                }
                if self.nodes[b.0].requires_grad {
                    // dB = Aᵀ · G
                    let mut db = vec![0.0; k * m];
                    for i in 0..n {
                        let grow = &g.data()[i * m..(i + 1) * m];
                        for p in 0..k {
                            let s = ta.data()[i * k + p];
                            if s == 0.0 {
                                continue;
                            }
                            for (o, gv) in db[p * m..(p + 1) * m].iter_mut().zip(grow) {
                                *o += s * gv;
                            }
                        }
                    }
                    send(*b, Tensor::matrix(k, m, db).expect("shape of b"));
                }
            }
            Op::AddRow(x, row) => {
                send(*x, g.clone());
                let m = g.cols();
                let mut db = vec![0.0; m];
                for chunk in g.data().chunks(m) {
                    for (acc, v) in db.iter_mut().zip(chunk) {
                        *acc += v;
                    }
                }
                send(*row, Tensor::matrix(1, m, db).expect("bias row"));
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                send(*a, zip_with(g, tb, |gv, bv| gv * bv));
                send(*b, zip_with(g, ta, |gv, av| gv * av));
            }
            Op::Affine { x, scale } => send(*x, g.map(|v| v * scale)),
            Op::Tanh(x) => send(*x, zip_with(g, y, |gv, yv| gv * (1.0 - yv * yv))),
            Op::Sigmoid(x) => send(*x, zip_with(g, y, |gv, yv| gv * yv * (1.0 - yv))),
            Op::Relu(x) => {
                let tx = self.value(*x);
                send(*x, zip_with(g, tx, |gv, xv| if xv > 0.0 { gv } else { 0.0 }));
            }
            Op::Softplus(x) => {
                let tx = self.value(*x);
                send(*x, zip_with(g, tx, |gv, xv| gv * sigmoid(xv)));
            }
            Op::SoftmaxRows(x) => {
                let m = y.cols();
                let mut dx = Vec::with_capacity(y.numel());
                for (yrow, grow) in y.data().chunks(m).zip(g.data().chunks(m)) {
                    let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    dx.extend(yrow.iter().zip(grow).map(|(yv, gv)| yv * (gv - dot)));
                }
                send(*x, Tensor::new(y.shape().to_vec(), dx).expect("softmax shape"));
            }
            Op::Log(x) => {
                let tx = self.value(*x);
                send(*x, zip_with(g, tx, |gv, xv| gv / xv));
            }
            Op::Clamp { x, lo, hi } => {
                let tx = self.value(*x);
                let (lo, hi) = (*lo, *hi);
                send(
                    *x,
                    zip_with(g, tx, |gv, xv| if xv >= lo && xv <= hi { gv } else { 0.0 }),
                );
            }
            Op::Sum(x) => {
                let tx = self.value(*x);
                send(*x, Tensor::full(tx.shape(), g.item()));
            }
            Op::Mean(x) => {
                let tx = self.value(*x);
                send(*x, Tensor::full(tx.shape(), g.item() / tx.numel() as f64));
            }
            Op::MeanRows(x) => {
                let tx = self.value(*x);
                let m = tx.cols();
                let mut dx = Vec::with_capacity(tx.numel());
                for &gv in g.data() {
                    dx.extend(core::iter::repeat_n(gv / m as f64, m));
                }
                send(*x, Tensor::new(tx.shape().to_vec(), dx).expect("mean_rows shape"));
            }
            Op::MeanCols(x) => {
                let tx = self.value(*x);
                let n = tx.rows();
                let mut dx = Vec::with_capacity(tx.numel());
                for _ in 0..n {
                    dx.extend(g.data().iter().map(|gv| gv / n as f64));
                }
                send(*x, Tensor::new(tx.shape().to_vec(), dx).expect("mean_cols shape"));
            }
            Op::Extremum { x, at } => {
                let mut dx = Tensor::zeros(self.value(*x).shape());
                dx.data_mut()[*at] = g.item();
                send(*x, dx);
            }
            Op::PairwiseSqDist(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, k, d) = (ta.rows(), tb.rows(), ta.cols());
                let mut da = vec![0.0; n * d];
                let mut db = vec![0.0; k * d];
                for i in 0..n {
                    for j in 0..k {
                        let gij = g.data()[i * k + j];
                        if gij == 0.0 {
                            continue;
                        }
                        for c in 0..d {
                            let diff = 2.0 * gij * (ta.data()[i * d + c] - tb.data()[j * d + c]);
                            da[i * d + c] += diff;
                            db[j * d + c] -= diff;
                        }
                    }
                }
                send(*a, Tensor::matrix(n, d, da).expect("shape of a"));
                send(*b, Tensor::matrix(k, d, db).expect("shape of b"));
            }
            Op::Flatten(x) => {
                let shape = self.value(*x).shape().to_vec();
                send(*x, g.clone().reshape(shape).expect("same element count"));
            }
            Op::Concat(xs) => {
                let mut offset = 0;
                for &x in xs {
                    let tx = self.value(x);
                    let n = tx.numel();
                    let part = g.data()[offset..offset + n].to_vec();
                    offset += n;
                    send(x, Tensor::new(tx.shape().to_vec(), part).expect("concat part"));
                }
            }
            Op::Sort { x, order } => {
                let mut dx = Tensor::zeros(self.value(*x).shape());
                for (pos, &src) in order.iter().enumerate() {
                    dx.data_mut()[src] = g.data()[pos];
                }
                send(*x, dx);
            }
            Op::Pick { x, cols } => {
                let tx = self.value(*x);
                let mut dx = Tensor::zeros(tx.shape());
                let m = tx.cols();
                for (i, &c) in cols.iter().enumerate() {
                    dx.data_mut()[i * m + c] = g.data()[i];
                }
                send(*x, dx);
            }
            Op::GradReverse(x) => send(*x, g.map(|v| -v)),
        }
    }
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("operands share a shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_shape_rule() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::matrix(2, 3, vec![1.0; 6]).unwrap());
        let b = g.constant(Tensor::matrix(3, 1, vec![1.0; 3]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1]);
        assert_eq!(g.value(c).data(), &[3.0, 3.0]);
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        match g.matmul(a, b) {
            Err(Error::ShapeMismatch { op, left, right }) => {
                assert_eq!(op, "matmul");
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn activations_at_zero() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::scalar(0.0));
        let th = g.tanh(z);
        let sg = g.sigmoid(z);
        let sp = g.softplus(z);
        assert_eq!(g.value(th).item(), 0.0);
        assert_eq!(g.value(sg).item(), 0.5);
        assert!((g.value(sp).item() - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn pairwise_distance_hand_case() {
        let mut g = Graph::new();
        let a = g.constant(t(&[&[0.0, 0.0]]));
        let b = g.constant(t(&[&[3.0, 4.0]]));
        let d = g.pairwise_sq_dist(a, b).unwrap();
        assert_eq!(g.value(d).data(), &[25.0]);
    }

    #[test]
    fn sum_gives_ones() {
        let mut g = Graph::new();
        let w = g.param(t(&[&[1.0, -2.0, 3.5]]));
        let s = g.sum(w);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn mean_of_squares() {
        let mut g = Graph::new();
        let w = g.param(t(&[&[2.0, 4.0]]));
        let sq = g.mul(w, w).unwrap();
        let m = g.mean(sq);
        let grads = g.backward(m).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let w = g.param(t(&[&[1.0, 2.0]]));
        assert!(matches!(g.backward(w), Err(Error::NonScalarLoss { .. })));
    }

    #[test]
    fn grad_reverse_contract() {
        let mut g = Graph::new();
        let w = g.param(t(&[&[1.0, 2.0, 3.0]]));
        let r = g.grad_reverse(w);
        assert_eq!(g.value(r), g.value(w));
        let s = g.sum(r);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[-1.0, -1.0, -1.0]);
    }

    #[test]
    fn grad_reverse_flips_upstream() {
        // upstream gradient [0.5, -0.5] injected through a weighted sum
        let mut g = Graph::new();
        let w = g.param(t(&[&[7.0, -3.0]]));
        let r = g.grad_reverse(w);
        let c = g.constant(t(&[&[0.5, -0.5]]));
        let p = g.mul(r, c).unwrap();
        let s = g.sum(p);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[-0.5, 0.5]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::new();
        let c = g.constant(t(&[&[1.0, 2.0]]));
        let w = g.param(t(&[&[3.0, 4.0]]));
        let p = g.mul(c, w).unwrap();
        let s = g.sum(p);
        let grads = g.backward(s).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(w).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn sort_routes_gradient_back() {
        let mut g = Graph::new();
        let w = g.param(t(&[&[3.0, 1.0, 2.0]]));
        let s = g.sort(w);
        assert_eq!(g.value(s).data(), &[1.0, 2.0, 3.0]);
        let weights = g.constant(t(&[&[10.0, 20.0, 30.0]]));
        let p = g.mul(s, weights).unwrap();
        let total = g.sum(p);
        let grads = g.backward(total).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[30.0, 10.0, 20.0]);
    }
}
