//! Recording graph for reverse-mode differentiation.
//!
//! Every op appends one node holding its output value and enough saved state
//! to run its backward rule. Nodes are stored in execution order, so the
//! backward pass is a single reverse sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TensorError};
use crate::params::{Bound, ParamStore};
use crate::tensor::{numel, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    Transpose { a: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, s: f64 },
    AddScalar { a: usize },
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize },
    Reshape { a: usize },
    LayerNorm { x: usize, gamma: usize, beta: usize, xhat: Vec<f64>, inv_std: Vec<f64> },
    Embedding { table: usize, ids: Vec<usize> },
    Dropout { a: usize, mask: Vec<f64> },
    Tanh { a: usize },
    Sigmoid { a: usize },
    Relu { a: usize },
    Gelu { a: usize },
    Exp { a: usize },
    Ln { a: usize },
    Clamp { a: usize, lo: f64, hi: f64 },
    Softmax { a: usize, axis: usize },
    MaskedSoftmax { a: usize },
    LogSoftmax { a: usize },
    Nll { logp: usize, targets: Vec<usize>, ignore: Option<usize>, scale: f64 },
    Sum { a: usize },
    Mean { a: usize },
    MeanAxis { a: usize, axis: usize },
    Select { a: usize, indices: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// How [`Graph::nll_loss`] reduces over the kept positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

/// Execution record for one forward pass.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    seed: u64,
    rng: ChaCha8Rng,
    train: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` is unreachable.
    pub fn get(&self, v: Var) -> Tensor {
        let shape = &self.shapes[v.0];
        match &self.grads[v.0] {
            Some(g) => Tensor::from_parts(shape.clone(), g.clone()),
            None => Tensor::zeros(shape),
        }
    }

    pub fn get_raw(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn is_suffix(long: &[usize], short: &[usize]) -> bool {
    short.len() <= long.len() && long[long.len() - short.len()..] == *short
}

fn acc(grads: &mut [Option<Vec<f64>>], idx: usize, delta: Vec<f64>) {
    match &mut grads[idx] {
        Some(g) => {
            for (x, d) in g.iter_mut().zip(delta) {
                *x += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

impl Graph {
    pub fn new(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            train: true,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    /// Enables or disables training behaviour (dropout).
    pub fn set_train(&mut self, train: bool) {
        self.train = train;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after the first `len`. Handles to dropped
    /// nodes must not be used afterwards.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: usize) -> bool {
        self.nodes[v].requires_grad
    }

    fn data(&self, v: usize) -> &[f64] {
        self.nodes[v].value.data()
    }

    fn shp(&self, v: usize) -> &[usize] {
        self.nodes[v].value.shape()
    }

    /// Records an input tensor; its `requires_grad` flag is honoured.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad();
        self.push(t, Op::Leaf, rg)
    }

    /// Records an input tensor that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let t = t.with_requires_grad(false);
        self.push(t, Op::Leaf, false)
    }

    /// Records every parameter as a gradient-tracking leaf.
    pub fn bind(&mut self, params: &ParamStore) -> Bound {
        let vars = params
            .iter()
            .map(|(_, t)| self.leaf(t.clone().with_requires_grad(true)))
            .collect();
        Bound::new(vars)
    }

    /// Records every parameter as a constant.
    pub fn bind_frozen(&mut self, params: &ParamStore) -> Bound {
        let vars = params.iter().map(|(_, t)| self.constant(t.clone())).collect();
        Bound::new(vars)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shp(a.0).to_vec(), self.shp(b.0).to_vec());
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        let batch_a = &sa[..sa.len() - 2];
        let batch_b = &sb[..sb.len() - 2];
        if k != k2 || !(batch_b.is_empty() || batch_a == batch_b) {
            return Err(mismatch());
        }
        let batches: usize = batch_a.iter().product();
        let shared = batch_b.is_empty();
        let (da, db) = (self.data(a.0), self.data(b.0));
        let mut out = vec![0.0; batches * m * n];
        for bi in 0..batches {
            let ao = bi * m * k;
            let bo = if shared { 0 } else { bi * k * n };
            let co = bi * m * n;
            for i in 0..m {
                let crow = &mut out[co + i * n..co + (i + 1) * n];
                for p in 0..k {
                    let av = da[ao + i * k + p];
                    if av == 0.0 {
                        continue;
                    }
                    let brow = &db[bo + p * n..bo + (p + 1) * n];
                    for (c, bv) in crow.iter_mut().zip(brow) {
                        *c += av * bv;
                    }
                }
            }
        }
        let mut shape = batch_a.to_vec();
        shape.extend([m, n]);
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(Tensor::from_parts(shape, out), Op::MatMul { a: a.0, b: b.0 }, rg))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shp(a.0).to_vec();
        if s.len() < 2 {
            return Err(TensorError::AxisOutOfRange { axis: 1, rank: s.len() });
        }
        let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
        let batches = numel(&s) / (r * c);
        let d = self.data(a.0);
        let mut out = vec![0.0; d.len()];
        for b in 0..batches {
            let o = b * r * c;
            for i in 0..r {
                for j in 0..c {
                    out[o + j * r + i] = d[o + i * c + j];
                }
            }
        }
        let mut shape = s.clone();
        let rank = shape.len();
        shape.swap(rank - 2, rank - 1);
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Transpose { a: a.0 }, rg))
    }

    fn broadcast_check(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shp(a.0), self.shp(b.0));
        if is_suffix(sa, sb) {
            Ok(())
        } else {
            Err(TensorError::ShapeMismatch {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            })
        }
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let da = self.data(a.0);
        let db = self.data(b.0);
        let nb = db.len();
        let out: Vec<f64> = da.iter().enumerate().map(|(i, &x)| f(x, db[i % nb])).collect();
        let shape = self.shp(a.0).to_vec();
        let rg = self.rg(a.0) || self.rg(b.0);
        self.push(Tensor::from_parts(shape, out), op, rg)
    }

    /// Elementwise `a + b`; `b`'s shape may be a trailing suffix of `a`'s.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("add", a, b)?;
        Ok(self.binary(a, b, |x, y| x + y, Op::Add { a: a.0, b: b.0 }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("sub", a, b)?;
        Ok(self.binary(a, b, |x, y| x - y, Op::Sub { a: a.0, b: b.0 }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.broadcast_check("mul", a, b)?;
        Ok(self.binary(a, b, |x, y| x * y, Op::Mul { a: a.0, b: b.0 }))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out: Vec<f64> = self.data(a.0).iter().map(|&x| f(x)).collect();
        let shape = self.shp(a.0).to_vec();
        let rg = self.rg(a.0);
        self.push(Tensor::from_parts(shape, out), op, rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.unary(a, |x| x * s, Op::Scale { a: a.0, s })
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar { a: a.0 })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh { a: a.0 })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid { a: a.0 })
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu { a: a.0 })
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(
            a,
            |x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()),
            Op::Gelu { a: a.0 },
        )
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.unary(a, f64::exp, Op::Exp { a: a.0 });
        if !self.value(v).is_finite() {
            return Err(TensorError::NonFinite("exp"));
        }
        Ok(v)
    }

    /// Natural logarithm; every input must be strictly positive.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        if self.data(a.0).iter().any(|&x| x <= 0.0 || !x.is_finite()) {
            return Err(TensorError::NonFinite("ln"));
        }
        Ok(self.unary(a, f64::ln, Op::Ln { a: a.0 }))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp { a: a.0, lo, hi })
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .map(|v| self.shp(v.0).to_vec())
            .ok_or(TensorError::InvalidShape { shape: vec![], len: 0 })?;
        if axis >= first.len() {
            return Err(TensorError::AxisOutOfRange { axis, rank: first.len() });
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shp(v.0);
            let compatible = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&first, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let len = self.shp(v.0)[axis] * inner;
                out.extend_from_slice(&self.data(v.0)[o * len..(o + 1) * len]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let rg = inputs.iter().any(|v| self.rg(v.0));
        let op = Op::Concat {
            inputs: inputs.iter().map(|v| v.0).collect(),
            axis,
        };
        Ok(self.push(Tensor::from_parts(shape, out), op, rg))
    }

    /// Copies `[start, end)` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let s = self.shp(a.0).to_vec();
        if axis >= s.len() {
            return Err(TensorError::AxisOutOfRange { axis, rank: s.len() });
        }
        if start >= end || end > s[axis] {
            return Err(TensorError::IndexOutOfRange { index: end, len: s[axis] });
        }
        let (outer, len, inner) = axis_split(&s, axis);
        let d = self.data(a.0);
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * len * inner;
            out.extend_from_slice(&d[base + start * inner..base + end * inner]);
        }
        let mut shape = s;
        shape[axis] = end - start;
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Slice { a: a.0, axis, start }, rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).reshaped(shape)?;
        let rg = self.rg(a.0);
        Ok(self.push(t, Op::Reshape { a: a.0 }, rg))
    }

    /// Layer normalisation over the last axis.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let s = self.shp(x.0).to_vec();
        let d = *s.last().ok_or(TensorError::AxisOutOfRange { axis: 0, rank: 0 })?;
        for p in [gamma, beta] {
            if self.shp(p.0) != [d] {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: s.clone(),
                    rhs: self.shp(p.0).to_vec(),
                });
            }
        }
        let xs = self.data(x.0);
        let (g, b) = (self.data(gamma.0), self.data(beta.0));
        let rows = xs.len() / d;
        let mut xhat = vec![0.0; xs.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xs.len()];
        for r in 0..rows {
            let row = &xs[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[r] = inv;
            for j in 0..d {
                let h = (row[j] - mean) * inv;
                xhat[r * d + j] = h;
                out[r * d + j] = h * g[j] + b[j];
            }
        }
        let rg = self.rg(x.0) || self.rg(gamma.0) || self.rg(beta.0);
        let op = Op::LayerNorm {
            x: x.0,
            gamma: gamma.0,
            beta: beta.0,
            xhat,
            inv_std,
        };
        Ok(self.push(Tensor::from_parts(s, out), op, rg))
    }

    /// Gathers rows of a `[vocab, dim]` table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shp(table.0).to_vec();
        if s.len() != 2 {
            return Err(TensorError::AxisOutOfRange { axis: 1, rank: s.len() });
        }
        if ids.is_empty() {
            return Err(TensorError::InvalidShape { shape: vec![0, s[1]], len: 0 });
        }
        let (v, d) = (s[0], s[1]);
        let t = self.data(table.0);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(TensorError::IndexOutOfRange { index: id, len: v });
            }
            out.extend_from_slice(&t[id * d..(id + 1) * d]);
        }
        let rg = self.rg(table.0);
        let op = Op::Embedding {
            table: table.0,
            ids: ids.to_vec(),
        };
        Ok(self.push(Tensor::from_parts(vec![ids.len(), d], out), op, rg))
    }

    /// Inverted dropout. Identity when the graph is in eval mode or `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidEntry(format!("dropout probability {p}")));
        }
        if !self.train || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - p;
        let n = self.data(a.0).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let out: Vec<f64> = self.data(a.0).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let shape = self.shp(a.0).to_vec();
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Dropout { a: a.0, mask }, rg))
    }

    /// Softmax along `axis`, with max subtraction.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let s = self.shp(a.0).to_vec();
        if axis >= s.len() {
            return Err(TensorError::AxisOutOfRange { axis, rank: s.len() });
        }
        let (outer, len, inner) = axis_split(&s, axis);
        let d = self.data(a.0);
        let mut out = vec![0.0; d.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| o * len * inner + j * inner + i;
                let max = (0..len).map(|j| d[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for j in 0..len {
                    let e = (d[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    z += e;
                }
                for j in 0..len {
                    out[idx(j)] /= z;
                }
            }
        }
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::from_parts(s, out), Op::Softmax { a: a.0, axis }, rg))
    }

    /// Softmax over the last axis of a `[.., q, k]` tensor where `keep` is a
    /// row-major `q × k` mask. Masked entries are exactly zero; a fully masked
    /// row is all zeros.
    pub fn masked_softmax(&mut self, a: Var, keep: &[bool]) -> Result<Var> {
        let s = self.shp(a.0).to_vec();
        if s.len() < 2 || keep.len() != s[s.len() - 2] * s[s.len() - 1] {
            return Err(TensorError::ShapeMismatch {
                op: "masked_softmax",
                lhs: s,
                rhs: vec![keep.len()],
            });
        }
        let k = s[s.len() - 1];
        let plane = keep.len();
        let d = self.data(a.0);
        let mut out = vec![0.0; d.len()];
        for r in 0..d.len() / k {
            let m = &keep[(r * k) % plane..(r * k) % plane + k];
            let row = &d[r * k..(r + 1) * k];
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &keep)| keep)
                .map(|(x, _)| *x)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut z = 0.0;
            for j in 0..k {
                if m[j] {
                    let e = (row[j] - max).exp();
                    out[r * k + j] = e;
                    z += e;
                }
            }
            for j in 0..k {
                out[r * k + j] /= z;
            }
        }
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::from_parts(s, out), Op::MaskedSoftmax { a: a.0 }, rg))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let s = self.shp(a.0).to_vec();
        let k = *s.last().ok_or(TensorError::AxisOutOfRange { axis: 0, rank: 0 })?;
        let d = self.data(a.0);
        let mut out = vec![0.0; d.len()];
        for r in 0..d.len() / k {
            let row = &d[r * k..(r + 1) * k];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for j in 0..k {
                out[r * k + j] = row[j] - lse;
            }
        }
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::from_parts(s, out), Op::LogSoftmax { a: a.0 }, rg))
    }

    /// Negative log-likelihood of `targets` under `[n, vocab]` log-probabilities.
    /// Positions whose target equals `ignore` are excluded; with nothing kept
    /// the result is zero.
    pub fn nll_loss(
        &mut self,
        logp: Var,
        targets: &[usize],
        ignore: Option<usize>,
        reduction: Reduction,
    ) -> Result<Var> {
        let s = self.shp(logp.0).to_vec();
        if s.len() != 2 || s[0] != targets.len() {
            return Err(TensorError::ShapeMismatch {
                op: "nll_loss",
                lhs: s,
                rhs: vec![targets.len()],
            });
        }
        let v = s[1];
        let d = self.data(logp.0);
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, &t) in targets.iter().enumerate() {
            if Some(t) == ignore {
                continue;
            }
            if t >= v {
                return Err(TensorError::IndexOutOfRange { index: t, len: v });
            }
            total -= d[i * v + t];
            count += 1;
        }
        let scale = match reduction {
            Reduction::Sum => 1.0,
            Reduction::Mean if count > 0 => 1.0 / count as f64,
            Reduction::Mean => 0.0,
        };
        let rg = self.rg(logp.0);
        let op = Op::Nll {
            logp: logp.0,
            targets: targets.to_vec(),
            ignore,
            scale,
        };
        Ok(self.push(Tensor::scalar(total * scale), op, rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.data(a.0).iter().sum();
        let rg = self.rg(a.0);
        self.push(Tensor::scalar(s), Op::Sum { a: a.0 }, rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let d = self.data(a.0);
        let s = d.iter().sum::<f64>() / d.len() as f64;
        let rg = self.rg(a.0);
        self.push(Tensor::scalar(s), Op::Mean { a: a.0 }, rg)
    }

    /// Mean along `axis`, removing it (a rank-1 input yields shape `[1]`).
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let s = self.shp(a.0).to_vec();
        if axis >= s.len() {
            return Err(TensorError::AxisOutOfRange { axis, rank: s.len() });
        }
        let (outer, len, inner) = axis_split(&s, axis);
        let d = self.data(a.0);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..len {
                for i in 0..inner {
                    out[o * inner + i] += d[o * len * inner + j * inner + i];
                }
            }
        }
        for x in &mut out {
            *x /= len as f64;
        }
        let mut shape = s;
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        let rg = self.rg(a.0);
        Ok(self.push(Tensor::from_parts(shape, out), Op::MeanAxis { a: a.0, axis }, rg))
    }

    /// Gathers flat elements into a rank-1 tensor.
    pub fn select(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let d = self.data(a.0);
        if indices.is_empty() {
            return Err(TensorError::InvalidShape { shape: vec![0], len: 0 });
        }
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            out.push(*d.get(i).ok_or(TensorError::IndexOutOfRange { index: i, len: d.len() })?);
        }
        let rg = self.rg(a.0);
        let op = Op::Select {
            a: a.0,
            indices: indices.to_vec(),
        };
        Ok(self.push(Tensor::from_parts(vec![indices.len()], out), op, rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.numel() != 1 {
            return Err(TensorError::NonScalarLoss(lt.shape().to_vec()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(gout) = grads[i].take() else { continue };
            self.backward_node(i, &gout, &mut grads);
            grads[i] = Some(gout);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn backward_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (sa, sb) = (self.shp(*a), self.shp(*b));
                let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
                let n = sb[sb.len() - 1];
                let batches = numel(sa) / (m * k);
                let shared = sb.len() == 2;
                let (da, db) = (self.data(*a), self.data(*b));
                if self.rg(*a) {
                    let mut ga = vec![0.0; da.len()];
                    for bi in 0..batches {
                        let bo = if shared { 0 } else { bi * k * n };
                        for r in 0..m {
                            let grow = &g[bi * m * n + r * n..bi * m * n + (r + 1) * n];
                            for p in 0..k {
                                let brow = &db[bo + p * n..bo + (p + 1) * n];
                                ga[bi * m * k + r * k + p] =
                                    grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                            }
                        }
                    }
                    acc(grads, *a, ga);
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; db.len()];
                    for bi in 0..batches {
                        let bo = if shared { 0 } else { bi * k * n };
                        for r in 0..m {
                            let grow = &g[bi * m * n + r * n..bi * m * n + (r + 1) * n];
                            for p in 0..k {
                                let av = da[bi * m * k + r * k + p];
                                if av == 0.0 {
                                    continue;
                                }
                                let dst = &mut gb[bo + p * n..bo + (p + 1) * n];
                                for (d, x) in dst.iter_mut().zip(grow) {
                                    *d += av * x;
                                }
                            }
                        }
                    }
                    acc(grads, *b, gb);
                }
            }
            Op::Transpose { a } => {
                let s = self.shp(*a);
                let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
                let mut ga = vec![0.0; g.len()];
                for b in 0..g.len() / (r * c) {
                    let o = b * r * c;
                    for i in 0..r {
                        for j in 0..c {
                            ga[o + i * c + j] = g[o + j * r + i];
                        }
                    }
                }
                acc(grads, *a, ga);
            }
            Op::Add { a, b } | Op::Sub { a, b } => {
                if self.rg(*a) {
                    acc(grads, *a, g.to_vec());
                }
                if self.rg(*b) {
                    let sign = if matches!(node.op, Op::Sub { .. }) { -1.0 } else { 1.0 };
                    let nb = self.data(*b).len();
                    let mut gb = vec![0.0; nb];
                    for (i, x) in g.iter().enumerate() {
                        gb[i % nb] += sign * x;
                    }
                    acc(grads, *b, gb);
                }
            }
            Op::Mul { a, b } => {
                let (da, db) = (self.data(*a), self.data(*b));
                let nb = db.len();
                if self.rg(*a) {
                    let ga = g.iter().enumerate().map(|(i, x)| x * db[i % nb]).collect();
                    acc(grads, *a, ga);
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; nb];
                    for (i, x) in g.iter().enumerate() {
                        gb[i % nb] += x * da[i];
                    }
                    acc(grads, *b, gb);
                }
            }
            Op::Scale { a, s } => acc(grads, *a, g.iter().map(|x| x * s).collect()),
            Op::AddScalar { a } | Op::Reshape { a } => acc(grads, *a, g.to_vec()),
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = axis_split(node.value.shape(), *axis);
                let mut offset = 0;
                for &inp in inputs {
                    let len = self.shp(inp)[*axis];
                    if self.rg(inp) {
                        let mut gi = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = o * total * inner + offset * inner;
                            gi.extend_from_slice(&g[base..base + len * inner]);
                        }
                        acc(grads, inp, gi);
                    }
                    offset += len;
                }
            }
            Op::Slice { a, axis, start } => {
                let s = self.shp(*a);
                let (outer, len, inner) = axis_split(s, *axis);
                let width = node.value.shape()[*axis];
                let mut ga = vec![0.0; numel(s)];
                for o in 0..outer {
                    let dst = o * len * inner + start * inner;
                    let src = o * width * inner;
                    ga[dst..dst + width * inner].copy_from_slice(&g[src..src + width * inner]);
                }
                acc(grads, *a, ga);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let d = self.data(*gamma).len();
                let gm = self.data(*gamma);
                let rows = g.len() / d;
                if self.rg(*gamma) || self.rg(*beta) {
                    let mut gg = vec![0.0; d];
                    let mut gb = vec![0.0; d];
                    for r in 0..rows {
                        for j in 0..d {
                            gg[j] += g[r * d + j] * xhat[r * d + j];
                            gb[j] += g[r * d + j];
                        }
                    }
                    if self.rg(*gamma) {
                        acc(grads, *gamma, gg);
                    }
                    if self.rg(*beta) {
                        acc(grads, *beta, gb);
                    }
                }
                if self.rg(*x) {
                    let mut gx = vec![0.0; g.len()];
                    for r in 0..rows {
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for j in 0..d {
                            let dh = g[r * d + j] * gm[j];
                            s1 += dh;
                            s2 += dh * xhat[r * d + j];
                        }
                        for j in 0..d {
                            let dh = g[r * d + j] * gm[j];
                            gx[r * d + j] = inv_std[r] / d as f64
                                * (d as f64 * dh - s1 - xhat[r * d + j] * s2);
                        }
                    }
                    acc(grads, *x, gx);
                }
            }
            Op::Embedding { table, ids } => {
                let d = self.shp(*table)[1];
                let mut gt = vec![0.0; self.data(*table).len()];
                for (r, &id) in ids.iter().enumerate() {
                    for j in 0..d {
                        gt[id * d + j] += g[r * d + j];
                    }
                }
                acc(grads, *table, gt);
            }
            Op::Dropout { a, mask } => {
                acc(grads, *a, g.iter().zip(mask).map(|(x, m)| x * m).collect())
            }
            Op::Tanh { a } => acc(grads, *a, g.iter().zip(y).map(|(x, y)| x * (1.0 - y * y)).collect()),
            Op::Sigmoid { a } => {
                acc(grads, *a, g.iter().zip(y).map(|(x, y)| x * y * (1.0 - y)).collect())
            }
            Op::Relu { a } => {
                let d = self.data(*a);
                acc(grads, *a, g.iter().zip(d).map(|(x, v)| if *v > 0.0 { *x } else { 0.0 }).collect())
            }
            Op::Gelu { a } => {
                let d = self.data(*a);
                let ga = g
                    .iter()
                    .zip(d)
                    .map(|(gx, &x)| {
                        let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
                        let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                        gx * (0.5 * (1.0 + t) + 0.5 * x * dt)
                    })
                    .collect();
                acc(grads, *a, ga);
            }
            Op::Exp { a } => acc(grads, *a, g.iter().zip(y).map(|(x, y)| x * y).collect()),
            Op::Ln { a } => {
                let d = self.data(*a);
                acc(grads, *a, g.iter().zip(d).map(|(x, v)| x / v).collect())
            }
            Op::Clamp { a, lo, hi } => {
                let d = self.data(*a);
                let ga = g
                    .iter()
                    .zip(d)
                    .map(|(x, v)| if *v >= *lo && *v <= *hi { *x } else { 0.0 })
                    .collect();
                acc(grads, *a, ga);
            }
            Op::Softmax { a, axis } => {
                let (outer, len, inner) = axis_split(node.value.shape(), *axis);
                let mut ga = vec![0.0; g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |j: usize| o * len * inner + j * inner + i;
                        let dot: f64 = (0..len).map(|j| y[idx(j)] * g[idx(j)]).sum();
                        for j in 0..len {
                            ga[idx(j)] = y[idx(j)] * (g[idx(j)] - dot);
                        }
                    }
                }
                acc(grads, *a, ga);
            }
            Op::MaskedSoftmax { a } => {
                let k = *node.value.shape().last().unwrap();
                let mut ga = vec![0.0; g.len()];
                for r in 0..g.len() / k {
                    let (ys, gs) = (&y[r * k..(r + 1) * k], &g[r * k..(r + 1) * k]);
                    let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                    for j in 0..k {
                        ga[r * k + j] = ys[j] * (gs[j] - dot);
                    }
                }
                acc(grads, *a, ga);
            }
            Op::LogSoftmax { a } => {
                let k = *node.value.shape().last().unwrap();
                let mut ga = vec![0.0; g.len()];
                for r in 0..g.len() / k {
                    let gs = &g[r * k..(r + 1) * k];
                    let total: f64 = gs.iter().sum();
                    for j in 0..k {
                        ga[r * k + j] = gs[j] - y[r * k + j].exp() * total;
                    }
                }
                acc(grads, *a, ga);
            }
            Op::Nll {
                logp,
                targets,
                ignore,
                scale,
            } => {
                let v = self.shp(*logp)[1];
                let mut gl = vec![0.0; self.data(*logp).len()];
                for (r, &t) in targets.iter().enumerate() {
                    if Some(t) != *ignore {
                        gl[r * v + t] = -g[0] * scale;
                    }
                }
                acc(grads, *logp, gl);
            }
            Op::Sum { a } => acc(grads, *a, vec![g[0]; self.data(*a).len()]),
            Op::Mean { a } => {
                let n = self.data(*a).len();
                acc(grads, *a, vec![g[0] / n as f64; n]);
            }
            Op::MeanAxis { a, axis } => {
                let s = self.shp(*a);
                let (outer, len, inner) = axis_split(s, *axis);
                let mut ga = vec![0.0; numel(s)];
                for o in 0..outer {
                    for j in 0..len {
                        for i in 0..inner {
                            ga[o * len * inner + j * inner + i] = g[o * inner + i] / len as f64;
                        }
                    }
                }
                acc(grads, *a, ga);
            }
            Op::Select { a, indices } => {
                let mut ga = vec![0.0; self.data(*a).len()];
                for (x, &i) in g.iter().zip(indices) {
                    ga[i] += x;
                }
                acc(grads, *a, ga);
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let mut g = Graph::new(0);
        let eye = g.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let m = g.constant(t(&[2, 2], &[3.0, -1.0, 2.5, 7.0]));
        let out = g.matmul(eye, m).unwrap();
        assert_eq!(g.value(out).data(), g.value(m).data());

        let a = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(t(&[2, 1], &[1.0, 1.0]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1]);
        assert_eq!(g.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut g = Graph::new(0);
        let a = g.constant(Tensor::zeros(&[3, 4]));
        let b = g.constant(Tensor::zeros(&[5, 4]));
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[3, 4]") && msg.contains("[5, 4]"), "{msg}");
    }

    #[test]
    fn matmul_broadcasts_leading_batch() {
        let mut g = Graph::new(0);
        let a = g.constant(t(&[2, 1, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(t(&[2, 1], &[1.0, 10.0]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1, 1]);
        assert_eq!(g.value(c).data(), &[21.0, 43.0]);
    }

    #[test]
    fn softmax_cases() {
        let mut g = Graph::new(0);
        let x = g.constant(t(&[4], &[0.0; 4]));
        let y = g.softmax(x, 0).unwrap();
        assert_eq!(g.value(y).data(), &[0.25; 4]);

        let x = g.constant(t(&[2], &[1000.0, 0.0]));
        let y = g.softmax(x, 0).unwrap();
        let d = g.value(y).data();
        assert!(d.iter().all(|v| v.is_finite()));
        assert!((d[0] - 1.0).abs() < 1e-12 && d[1] < 1e-300);

        let x = g.constant(t(&[2], &[1f64.ln(), 3f64.ln()]));
        let y = g.softmax(x, 0).unwrap();
        let d = g.value(y).data();
        assert!((d[0] - 0.25).abs() < 1e-12 && (d[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn masked_softmax_zeroes_masked_entries() {
        let mut g = Graph::new(0);
        let x = g.constant(t(&[2, 2], &[1.0, 5.0, 1.0, 5.0]));
        let y = g.masked_softmax(x, &[true, false, true, true]).unwrap();
        let d = g.value(y).data();
        assert_eq!(d[0], 1.0);
        assert_eq!(d[1], 0.0);
        assert!((d[2] + d[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backward_linear_and_square() {
        let mut g = Graph::new(0);
        let x = g.leaf(Tensor::ones(&[2, 3]).with_requires_grad(true));
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).data(), &[1.0; 6]);

        let mut g = Graph::new(0);
        let x = g.leaf(t(&[2], &[1.0, 2.0]).with_requires_grad(true));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_zeroes_unreachable() {
        let mut g = Graph::new(0);
        let x = g.leaf(Tensor::ones(&[2]).with_requires_grad(true));
        let unused = g.leaf(Tensor::ones(&[3]).with_requires_grad(true));
        assert!(matches!(g.backward(x), Err(TensorError::NonScalarLoss(_))));
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(unused).data(), &[0.0; 3]);
    }

    #[test]
    fn nll_ignores_padding() {
        let mut g = Graph::new(0);
        let x = g.constant(t(&[3, 2], &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        let lp = g.log_softmax(x).unwrap();
        let a = g.nll_loss(lp, &[1, 0, 0], Some(0), Reduction::Mean).unwrap();
        assert!((g.value(a).data()[0] - 2f64.ln()).abs() < 1e-12);
        let none = g.nll_loss(lp, &[0, 0, 0], Some(0), Reduction::Mean).unwrap();
        assert_eq!(g.value(none).data()[0], 0.0);
    }

    #[test]
    fn dropout_respects_mode() {
        let mut g = Graph::new(3);
        let x = g.constant(Tensor::ones(&[100]));
        g.set_train(false);
        assert_eq!(g.dropout(x, 0.5).unwrap(), x);
        g.set_train(true);
        let y = g.dropout(x, 0.5).unwrap();
        let zeros = g.value(y).data().iter().filter(|v| **v == 0.0).count();
        assert!(zeros > 20 && zeros < 80);
        assert!(g.dropout(x, 1.0).is_err());
    }

    #[test]
    fn concat_then_slice_is_identity() {
        let mut g = Graph::new(0);
        let a = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(t(&[2, 1], &[5.0, 6.0]));
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let a2 = g.slice(c, 1, 0, 2).unwrap();
        let b2 = g.slice(c, 1, 2, 3).unwrap();
        assert_eq!(g.value(a2), g.value(a));
        assert_eq!(g.value(b2), g.value(b));
    }
}
