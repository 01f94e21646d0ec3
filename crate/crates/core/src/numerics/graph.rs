//! Reverse-mode differentiation over an explicit computation graph.
//!
//! Nodes live in an arena and are appended in creation order, so the arena
//! order is already a topological order. `backward` walks it once in reverse.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Mul,
    Relu,
    Sigmoid,
    Tanh,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    SliceCols { input: Var, start: usize },
    GatherRows { input: Var, indices: Vec<usize> },
    Reshape(Var),
    Sum(Var),
    SoftmaxNll { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    GruGates { gi: Var, gh: Var, h: Var, rzn: Vec<[f64; 3]> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Output of [`Graph::softmax_nll`].
#[derive(Debug)]
pub struct SoftmaxNll {
    /// Mean negative log-likelihood, a one-element node.
    pub loss: Var,
    /// Row-wise class probabilities, `B x C`.
    pub probs: Tensor,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    backward_done: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, value: &Tensor) -> Var {
        self.push(value.clone(), Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` root w.r.t. a leaf, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        let (m, k, k2, n) = match (sa, sb) {
            ([m, k], [k2, n]) => (*m, *k, *k2, *n),
            _ => {
                return Err(Error::shape(format!(
                    "matmul needs rank-2 operands, got {:?} and {:?}",
                    sa, sb
                )))
            }
        };
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner dimensions differ: {:?} x {:?}",
                sa, sb
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
            false,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMul(a, b), rg))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(format!(
                "{} operands differ: {:?} vs {:?}",
                what, sa, sb
            )));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape(), data).expect("shapes checked");
        let rg = self.rg(a) || self.rg(b);
        self.push(value, op, rg)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let va = self.value(a);
        let value = Tensor::new(va.shape(), va.data().iter().map(|&x| f(x)).collect())
            .expect("same shape");
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// Adds a length-`n` bias to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = match self.value(a).shape() {
            [m, n] => (*m, *n),
            s => return Err(Error::shape(format!("add_row needs a matrix, got {:?}", s))),
        };
        if self.value(bias).shape() != [n] {
            return Err(Error::shape(format!(
                "bias {:?} does not match matrix [{}, {}]",
                self.value(bias).shape(),
                m,
                n
            )));
        }
        let mut data = self.value(a).data().to_vec();
        let b = self.value(bias).data();
        for row in data.chunks_mut(n.max(1)) {
            for (x, y) in row.iter_mut().zip(b) {
                *x += y;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(Tensor::new(&[m, n], data)?, Op::AddRow(a, bias), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn elementwise(&mut self, op: Elementwise, inputs: &[Var]) -> Result<Var> {
        let arity = match op {
            Elementwise::Add | Elementwise::Mul => 2,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::validation(format!(
                "{:?} takes {} operand(s), got {}",
                op,
                arity,
                inputs.len()
            )));
        }
        match op {
            Elementwise::Add => self.add(inputs[0], inputs[1]),
            Elementwise::Mul => self.mul(inputs[0], inputs[1]),
            Elementwise::Relu => Ok(self.relu(inputs[0])),
            Elementwise::Sigmoid => Ok(self.sigmoid(inputs[0])),
            Elementwise::Tanh => Ok(self.tanh(inputs[0])),
        }
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::shape("concat of zero tensors"))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::shape(format!(
                "concat axis {} out of range for {:?}",
                axis, base
            )));
        }
        let mut axis_len = 0;
        for &v in inputs {
            let s = self.value(v).shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::shape(format!(
                    "concat along axis {}: {:?} incompatible with {:?}",
                    axis, s, base
                )));
            }
            axis_len += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut shape = base.clone();
        shape[axis] = axis_len;
        let mut data = Vec::with_capacity(outer * axis_len * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::new(&shape, data)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = match self.value(a).shape() {
            [m, n] => (*m, *n),
            s => return Err(Error::shape(format!("slice_cols needs a matrix, got {:?}", s))),
        };
        if start > end || end > n {
            return Err(Error::shape(format!(
                "column range {}..{} outside [{}, {}]",
                start, end, m, n
            )));
        }
        let w = end - start;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(m * w);
        for r in 0..m {
            data.extend_from_slice(&src[r * n + start..r * n + end]);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(&[m, w], data)?,
            Op::SliceCols { input: a, start },
            rg,
        ))
    }

    /// Picks rows of a matrix by index (rows may repeat).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let (m, n) = match self.value(a).shape() {
            [m, n] => (*m, *n),
            s => return Err(Error::shape(format!("gather_rows needs a matrix, got {:?}", s))),
        };
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(Error::validation(format!(
                "row index {} out of range for {} rows",
                bad, m
            )));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(&[indices.len(), n], data)?,
            Op::GatherRows {
                input: a,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Gate arithmetic of one GRU step. `gi` and `gh` are the `S x 3H` input
    /// and hidden projections (bias included) laid out as reset, update and
    /// candidate blocks; `h` is the `S x H` previous state.
    ///
    /// `r = σ(gi_r + gh_r)`, `z = σ(gi_z + gh_z)`, `n = tanh(gi_n + r ⊙ gh_n)`,
    /// `h' = n + z ⊙ (h - n)`.
    pub fn gru_gates(&mut self, gi: Var, gh: Var, h: Var) -> Result<Var> {
        let hs = self.value(h).shape().to_vec();
        let [s, hid] = hs[..] else {
            return Err(Error::shape(format!("GRU state must be S x H, got {:?}", hs)));
        };
        for v in [gi, gh] {
            if self.value(v).shape() != [s, 3 * hid] {
                return Err(Error::shape(format!(
                    "GRU projections must be {:?}, got {:?}",
                    [s, 3 * hid],
                    self.value(v).shape()
                )));
            }
        }
        let (a, b, hv) = (self.value(gi).data(), self.value(gh).data(), self.value(h).data());
        let mut rzn = Vec::with_capacity(s * hid);
        let mut out = Vec::with_capacity(s * hid);
        for row in 0..s {
            let (a, b) = (&a[row * 3 * hid..], &b[row * 3 * hid..]);
            for j in 0..hid {
                let r = sigmoid(a[j] + b[j]);
                let z = sigmoid(a[hid + j] + b[hid + j]);
                let n = (a[2 * hid + j] + r * b[2 * hid + j]).tanh();
                out.push(n + z * (hv[row * hid + j] - n));
                rzn.push([r, z, n]);
            }
        }
        let rg = self.rg(gi) || self.rg(gh) || self.rg(h);
        Ok(self.push(Tensor::new(&[s, hid], out)?, Op::GruGates { gi, gh, h, rzn }, rg))
    }

    /// Row-wise softmax of `B x C` logits and the mean negative
    /// log-likelihood of `labels`.
    pub fn softmax_nll(&mut self, logits: Var, labels: &[usize]) -> Result<SoftmaxNll> {
        let (b, c) = match self.value(logits).shape() {
            [b, c] => (*b, *c),
            s => return Err(Error::shape(format!("logits must be B x C, got {:?}", s))),
        };
        if labels.len() != b {
            return Err(Error::shape(format!(
                "{} labels for {} logit rows",
                labels.len(),
                b
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::validation(format!(
                "label {} out of range for {} classes",
                bad, c
            )));
        }
        if b == 0 {
            return Err(Error::validation("softmax_nll on an empty batch"));
        }
        let probs = softmax_rows(self.value(logits).data(), c);
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -probs[i * c + l].ln())
            .sum::<f64>()
            / b as f64;
        let probs_t = Tensor::new(&[b, c], probs.clone())?;
        let rg = self.rg(logits);
        let loss = self.push(
            Tensor::scalar(loss),
            Op::SoftmaxNll {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        );
        Ok(SoftmaxNll {
            loss,
            probs: probs_t,
        })
    }

    /// Populates gradients of `root` w.r.t. every reachable leaf created with
    /// [`Graph::param`]. A graph supports a single backward pass.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::validation(
                "backward already ran on this graph; build a new graph",
            ));
        }
        if self.value(root).len() != 1 {
            return Err(Error::shape(format!(
                "backward root must be a scalar, got {:?}",
                self.value(root).shape()
            )));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let out = &nodes[i].value;
        let wants = |v: Var| nodes[v.0].requires_grad;
        macro_rules! acc {
            ($v:expr) => {
                slot(grads, nodes, $v)
            };
        }

        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (nodes[a.0].value.shape()[0], nodes[a.0].value.shape()[1]);
                let n = nodes[b.0].value.shape()[1];
                if wants(*a) {
                    let ga = acc!(*a);
                    gemm(m, n, k, g, false, nodes[b.0].value.data(), true, ga, true);
                }
                if wants(*b) {
                    let gb = acc!(*b);
                    gemm(k, m, n, nodes[a.0].value.data(), true, g, false, gb, true);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if wants(v) {
                        add_into(acc!(v), g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    add_into(acc!(*a), g);
                }
                if wants(*b) {
                    for (x, y) in acc!(*b).iter_mut().zip(g) {
                        *x -= y;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                if wants(*a) {
                    for ((x, gi), y) in acc!(*a).iter_mut().zip(g).zip(vb) {
                        *x += gi * y;
                    }
                }
                if wants(*b) {
                    for ((x, gi), y) in acc!(*b).iter_mut().zip(g).zip(va) {
                        *x += gi * y;
                    }
                }
            }
            Op::AddRow(a, bias) => {
                if wants(*a) {
                    add_into(acc!(*a), g);
                }
                if wants(*bias) {
                    let gb = acc!(*bias);
                    let n = gb.len().max(1);
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                }
            }
            Op::Relu(a) => {
                if wants(*a) {
                    let x = nodes[a.0].value.data();
                    for ((d, gi), xi) in acc!(*a).iter_mut().zip(g).zip(x) {
                        if *xi > 0.0 {
                            *d += gi;
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                if wants(*a) {
                    for ((d, gi), y) in acc!(*a).iter_mut().zip(g).zip(out.data()) {
                        *d += gi * y * (1.0 - y);
                    }
                }
            }
            Op::Tanh(a) => {
                if wants(*a) {
                    for ((d, gi), y) in acc!(*a).iter_mut().zip(g).zip(out.data()) {
                        *d += gi * (1.0 - y * y);
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let shape = out.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for &v in inputs {
                    let chunk = nodes[v.0].value.shape()[*axis] * inner;
                    if wants(v) {
                        let gv = acc!(v);
                        for o in 0..outer {
                            add_into(
                                &mut gv[o * chunk..(o + 1) * chunk],
                                &g[o * row + offset..o * row + offset + chunk],
                            );
                        }
                    }
                    offset += chunk;
                }
            }
            Op::SliceCols { input, start } => {
                if wants(*input) {
                    let n = nodes[input.0].value.shape()[1];
                    let w = out.shape()[1];
                    let gi = acc!(*input);
                    for r in 0..out.shape()[0] {
                        add_into(
                            &mut gi[r * n + start..r * n + start + w],
                            &g[r * w..(r + 1) * w],
                        );
                    }
                }
            }
            Op::GatherRows { input, indices } => {
                if wants(*input) {
                    let n = out.shape()[1];
                    let gi = acc!(*input);
                    for (r, &src) in indices.iter().enumerate() {
                        add_into(&mut gi[src * n..(src + 1) * n], &g[r * n..(r + 1) * n]);
                    }
                }
            }
            Op::Reshape(a) => {
                if wants(*a) {
                    add_into(acc!(*a), g);
                }
            }
            Op::Sum(a) => {
                if wants(*a) {
                    let s = g[0];
                    acc!(*a).iter_mut().for_each(|d| *d += s);
                }
            }
            Op::GruGates { gi, gh, h, rzn } => {
                let hid = out.shape()[1];
                let ghv = nodes[gh.0].value.data();
                let hv = nodes[h.0].value.data();
                let mut dgi = vec![0.0; ghv.len()];
                let mut dgh = vec![0.0; ghv.len()];
                for (k, (&[r, z, n], &go)) in rzn.iter().zip(g).enumerate() {
                    let (row, j) = (k / hid, k % hid);
                    let base = row * 3 * hid;
                    let da_n = go * (1.0 - z) * (1.0 - n * n);
                    let da_z = go * (hv[k] - n) * z * (1.0 - z);
                    let da_r = da_n * ghv[base + 2 * hid + j] * r * (1.0 - r);
                    dgi[base + j] = da_r;
                    dgi[base + hid + j] = da_z;
                    dgi[base + 2 * hid + j] = da_n;
                    dgh[base + j] = da_r;
                    dgh[base + hid + j] = da_z;
                    dgh[base + 2 * hid + j] = da_n * r;
                }
                if wants(*gi) {
                    add_into(acc!(*gi), &dgi);
                }
                if wants(*gh) {
                    add_into(acc!(*gh), &dgh);
                }
                if wants(*h) {
                    for ((d, go), &[_, z, _]) in acc!(*h).iter_mut().zip(g).zip(rzn) {
                        *d += go * z;
                    }
                }
            }
            Op::SoftmaxNll {
                logits,
                labels,
                probs,
            } => {
                if wants(*logits) {
                    let c = nodes[logits.0].value.shape()[1];
                    let scale = g[0] / labels.len() as f64;
                    let gl = acc!(*logits);
                    for (b, &l) in labels.iter().enumerate() {
                        for j in 0..c {
                            let onehot = if j == l { 1.0 } else { 0.0 };
                            gl[b * c + j] += scale * (probs[b * c + j] - onehot);
                        }
                    }
                }
            }
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> &'a mut Vec<f64> {
    let len = nodes[v.0].value.len();
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
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

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(classes.max(1)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / z));
    }
    out
}
