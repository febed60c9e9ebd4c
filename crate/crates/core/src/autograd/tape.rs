//! Wengert-list reverse-mode differentiation.
//!
//! Every primitive records its output and the handles of its inputs. A
//! backward pass walks the list once in reverse and accumulates vector-Jacobian
//! products into per-node buffers. Nodes are stored in creation order, so the
//! list is topologically sorted by construction.
//!
//! Elementwise binary ops accept either identical shapes or a right-hand
//! operand whose shape equals the left-hand shape minus its leading axis (a
//! bias row broadcast over the batch). Nothing else broadcasts.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operation kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Scale,
    Concat,
    Slice,
    GatherRows,
    Pick,
    Sigmoid,
    Tanh,
    LogSigmoid,
    Softmax,
    LogSoftmax,
    Sum,
    Mean,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    GatherRows { table: Var, ids: Vec<usize> },
    Pick { input: Var, cols: Vec<usize> },
    Sigmoid(Var),
    Tanh(Var),
    LogSigmoid(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::Concat { .. } => OpKind::Concat,
            Op::Slice { .. } => OpKind::Slice,
            Op::GatherRows { .. } => OpKind::GatherRows,
            Op::Pick { .. } => OpKind::Pick,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Tanh(_) => OpKind::Tanh,
            Op::LogSigmoid(_) => OpKind::LogSigmoid,
            Op::Softmax(_) => OpKind::Softmax,
            Op::LogSoftmax(_) => OpKind::LogSoftmax,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of a scalar loss with respect to the differentiable leaves.
#[derive(Debug)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`, or `None` if it is not a differentiable leaf.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.leaves.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.leaves.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node so the tape can record a new graph.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn kind(&self, var: Var) -> OpKind {
        self.nodes[var.0].op.kind()
    }

    /// A differentiable input.
    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_kernel(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        let rg = self.any_grad(&[a, b]);
        self.push(value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("add", a, b, |x, y| x + y)?;
        let rg = self.any_grad(&[a, b]);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("sub", a, b, |x, y| x - y)?;
        let rg = self.any_grad(&[a, b]);
        self.push(value, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("mul", a, b, |x, y| x * y)?;
        let rg = self.any_grad(&[a, b]);
        self.push(value, Op::Mul(a, b), rg)
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let value = self.map(a, |x| x * factor);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Scale(a, factor), rg)
    }

    fn binary(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_broadcast(op, ta.shape(), tb.shape())?;
        let bd = tb.data();
        let inner = bd.len();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bd[i % inner]))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
            .expect("map preserves shape")
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::EmptyInput("concat of zero tensors".into()))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", &base, &[axis]));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::shape("concat", &base, s));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, out)?;
        let rg = self.any_grad(inputs);
        self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        )
    }

    /// Keeps indices `start..end` along `axis`.
    pub fn slice(&mut self, input: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() || start > end || end > s[axis] {
            return Err(Error::shape("slice", &s, &[axis, start, end]));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let chunk = s[axis] * inner;
        let data = self.value(input).data();
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * chunk;
            out.extend_from_slice(&data[base + start * inner..base + end * inner]);
        }
        let mut shape = s;
        shape[axis] = end - start;
        let value = Tensor::new(shape, out)?;
        let rg = self.any_grad(&[input]);
        self.push(value, Op::Slice { input, axis, start }, rg)
    }

    /// Selects rows of a 2-D table; the result is `ids.len() × cols`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape(table).to_vec();
        if s.len() != 2 {
            return Err(Error::shape("gather_rows", &s, &[ids.len()]));
        }
        let (rows, cols) = (s[0], s[1]);
        let t = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(Error::IndexOutOfRange {
                    op: "gather_rows",
                    index: id,
                    len: rows,
                });
            }
            out.extend_from_slice(&t[id * cols..(id + 1) * cols]);
        }
        let value = Tensor::new(vec![ids.len(), cols], out)?;
        let rg = self.any_grad(&[table]);
        self.push(
            value,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            rg,
        )
    }

    /// Picks entry `cols[r]` from row `r` of a 2-D tensor; the result is a
    /// vector with one entry per row.
    pub fn pick(&mut self, input: Var, cols: &[usize]) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if s.len() != 2 || s[0] != cols.len() {
            return Err(Error::shape("pick", &s, &[cols.len()]));
        }
        let width = s[1];
        let t = self.value(input).data();
        let mut out = Vec::with_capacity(cols.len());
        for (r, &c) in cols.iter().enumerate() {
            if c >= width {
                return Err(Error::IndexOutOfRange {
                    op: "pick",
                    index: c,
                    len: width,
                });
            }
            out.push(t[r * width + c]);
        }
        let value = Tensor::vector(out);
        let rg = self.any_grad(&[input]);
        self.push(
            value,
            Op::Pick {
                input,
                cols: cols.to_vec(),
            },
            rg,
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.map(a, sigmoid);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.map(a, f64::tanh);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Tanh(a), rg)
    }

    /// `log σ(x)`, computed without overflow.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.map(a, log_sigmoid);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::LogSigmoid(a), rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() == 0 {
            return Err(Error::shape("softmax", t.shape(), &[]));
        }
        let mut data = t.data().to_vec();
        let cols = t.cols();
        if cols > 0 {
            data.chunks_mut(cols).for_each(softmax_in_place);
        }
        let value = Tensor::new(t.shape().to_vec(), data)?;
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Softmax(a), rg)
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() == 0 {
            return Err(Error::shape("log_softmax", t.shape(), &[]));
        }
        let mut data = t.data().to_vec();
        let cols = t.cols();
        if cols > 0 {
            for row in data.chunks_mut(cols) {
                let lse = log_sum_exp(row);
                row.iter_mut().for_each(|x| *x -= lse);
            }
        }
        let value = Tensor::new(t.shape().to_vec(), data)?;
        let rg = self.any_grad(&[a]);
        self.push(value, Op::LogSoftmax(a), rg)
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).data().iter().sum();
        let rg = self.any_grad(&[a]);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    /// Mean of all entries, as a scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::EmptyInput("mean of an empty tensor".into()));
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.any_grad(&[a]);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Every differentiable leaf receives a gradient (zeros when the loss
    /// does not depend on it). The tape is consumed: a second call fails
    /// until [`Tape::clear`] is used and a new graph recorded.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        let ls = self.shape(loss);
        if ls.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(ls.to_vec()));
        }
        self.consumed = true;

        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        let mut leaves: Vec<Option<Tensor>> = vec![None; n];

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                let g = grads[i]
                    .take()
                    .unwrap_or_else(|| vec![0.0; node.value.len()]);
                leaves[i] = Some(Tensor::new(node.value.shape().to_vec(), g)?);
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        // Leaves created after the loss node are unreachable from it.
        for (i, node) in self.nodes.iter().enumerate().skip(loss.0 + 1) {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                leaves[i] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        self.nodes.clear();
        Ok(Gradients { leaves })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                self.accumulate(grads, *a, |ga| {
                    // dA = dC · Bᵀ
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &tb.data()[p * n..(p + 1) * n];
                            ga[r * k + p] += dot(grow, brow);
                        }
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    // dB = Aᵀ · dC
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let a_rp = ta.data()[r * k + p];
                            axpy(a_rp, grow, &mut gb[p * n..(p + 1) * n]);
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| axpy(1.0, g, ga));
                self.accumulate(grads, *b, |gb| reduce_into(g, gb, |x, _| x));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |ga| axpy(1.0, g, ga));
                self.accumulate(grads, *b, |gb| reduce_into(g, gb, |x, _| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                let inner = tb.len();
                self.accumulate(grads, *a, |ga| {
                    for (j, gj) in ga.iter_mut().enumerate() {
                        *gj += g[j] * tb[j % inner];
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    let prod: Vec<f64> = g.iter().zip(ta).map(|(x, y)| x * y).collect();
                    reduce_into(&prod, gb, |x, _| x);
                });
            }
            Op::Scale(a, factor) => {
                self.accumulate(grads, *a, |ga| axpy(*factor, g, ga));
            }
            Op::Concat { inputs, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for &v in inputs {
                    let chunk = self.shape(v)[*axis] * inner;
                    self.accumulate(grads, v, |gv| {
                        for o in 0..outer {
                            let src = &g[o * row + offset..o * row + offset + chunk];
                            axpy(1.0, src, &mut gv[o * chunk..(o + 1) * chunk]);
                        }
                    });
                    offset += chunk;
                }
            }
            Op::Slice { input, axis, start } => {
                let in_shape = self.shape(*input);
                let outer: usize = in_shape[..*axis].iter().product();
                let inner: usize = in_shape[axis + 1..].iter().product();
                let chunk = in_shape[*axis] * inner;
                let width = node.value.shape()[*axis] * inner;
                self.accumulate(grads, *input, |gi| {
                    for o in 0..outer {
                        let dst = o * chunk + start * inner;
                        axpy(1.0, &g[o * width..(o + 1) * width], &mut gi[dst..dst + width]);
                    }
                });
            }
            Op::GatherRows { table, ids } => {
                let cols = self.shape(*table)[1];
                self.accumulate(grads, *table, |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        axpy(
                            1.0,
                            &g[r * cols..(r + 1) * cols],
                            &mut gt[id * cols..(id + 1) * cols],
                        );
                    }
                });
            }
            Op::Pick { input, cols } => {
                let width = self.shape(*input)[1];
                self.accumulate(grads, *input, |gi| {
                    for (r, &c) in cols.iter().enumerate() {
                        gi[r * width + c] += g[r];
                    }
                });
            }
            Op::Sigmoid(a) => self.accumulate(grads, *a, |ga| {
                for ((gi, &y), &go) in ga.iter_mut().zip(out).zip(g) {
                    *gi += go * y * (1.0 - y);
                }
            }),
            Op::Tanh(a) => self.accumulate(grads, *a, |ga| {
                for ((gi, &y), &go) in ga.iter_mut().zip(out).zip(g) {
                    *gi += go * (1.0 - y * y);
                }
            }),
            Op::LogSigmoid(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |ga| {
                    for ((gi, &xi), &go) in ga.iter_mut().zip(x).zip(g) {
                        *gi += go * sigmoid(-xi);
                    }
                });
            }
            Op::Softmax(a) => {
                let cols = node.value.cols();
                self.accumulate(grads, *a, |ga| {
                    for ((gr, yr), dr) in ga
                        .chunks_mut(cols)
                        .zip(out.chunks(cols))
                        .zip(g.chunks(cols))
                    {
                        let s = dot(yr, dr);
                        for ((gi, &y), &d) in gr.iter_mut().zip(yr).zip(dr) {
                            *gi += y * (d - s);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let cols = node.value.cols();
                self.accumulate(grads, *a, |ga| {
                    for ((gr, yr), dr) in ga
                        .chunks_mut(cols)
                        .zip(out.chunks(cols))
                        .zip(g.chunks(cols))
                    {
                        let s: f64 = dr.iter().sum();
                        for ((gi, &y), &d) in gr.iter_mut().zip(yr).zip(dr) {
                            *gi += d - y.exp() * s;
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let go = g[0];
                self.accumulate(grads, *a, |ga| ga.iter_mut().for_each(|x| *x += go));
            }
            Op::Mean(a) => {
                let go = g[0] / self.value(*a).len() as f64;
                self.accumulate(grads, *a, |ga| ga.iter_mut().for_each(|x| *x += go));
            }
        }
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Vec<f64>>],
        var: Var,
        f: impl FnOnce(&mut [f64]),
    ) {
        let node = &self.nodes[var.0];
        if !node.requires_grad {
            return;
        }
        let buf = grads[var.0].get_or_insert_with(|| vec![0.0; node.value.len()]);
        f(buf);
    }
}

fn check_broadcast(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a == b || (!a.is_empty() && b == &a[1..]) {
        Ok(())
    } else {
        Err(Error::shape(op, a, b))
    }
}

/// Adds `g` into `out`, summing over the leading axis when `out` is a
/// broadcast operand.
fn reduce_into(g: &[f64], out: &mut [f64], f: impl Fn(f64, usize) -> f64) {
    let inner = out.len();
    if inner == 0 {
        return;
    }
    for (j, &x) in g.iter().enumerate() {
        out[j % inner] += f(x, j);
    }
}

fn matmul_kernel(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for r in 0..m {
        let orow = &mut out[r * n..(r + 1) * n];
        for p in 0..k {
            axpy(a[r * k + p], &b[p * n..(p + 1) * n], orow);
        }
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    row.iter_mut().for_each(|x| *x /= total);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_with_identity() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let i = tape.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let c = tape.matmul(a, i).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sigmoid_and_softmax_at_symmetric_points() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::vector(vec![0.0, 0.0])).unwrap();
        let s = tape.sigmoid(z).unwrap();
        assert_eq!(tape.value(s).data(), &[0.5, 0.5]);
        let ones = tape.constant(Tensor::vector(vec![1.0; 4])).unwrap();
        let p = tape.softmax(ones).unwrap();
        assert_eq!(tape.value(p).data(), &[0.25; 4]);
    }

    #[test]
    fn mismatched_matmul_names_op_and_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul") && msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn gather_out_of_range() {
        let mut tape = Tape::new();
        let table = tape.param(Tensor::zeros(&[3, 2])).unwrap();
        assert!(matches!(
            tape.gather_rows(table, &[0, 3]),
            Err(Error::IndexOutOfRange { index: 3, len: 3, .. })
        ));
    }

    #[test]
    fn broadcast_only_over_leading_axis() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[4, 3])).unwrap();
        let bias = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        let col = tape.constant(Tensor::zeros(&[4, 1])).unwrap();
        let y = tape.add(x, bias).unwrap();
        assert_eq!(tape.value(y).row(3), &[1.0, 2.0, 3.0]);
        assert!(tape.add(x, col).is_err());
        assert!(tape.mul(bias, x).is_err());
    }

    #[test]
    fn linear_form_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0])).unwrap();
        let y = tape.constant(Tensor::vector(vec![3.0, 4.0])).unwrap();
        let p = tape.mul(x, y).unwrap();
        let loss = tape.sum(p).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[3.0, 4.0]);
        assert!(g.get(y).is_none());
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![0.0])).unwrap();
        let s = tape.sigmoid(x).unwrap();
        let loss = tape.sum(s).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.25]);
    }

    #[test]
    fn unreached_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 1.0])).unwrap();
        let unused = tape.param(Tensor::zeros(&[2, 2])).unwrap();
        let loss = tape.sum(x).unwrap();
        let late = tape.param(Tensor::vector(vec![5.0])).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(unused).unwrap(), &Tensor::zeros(&[2, 2]));
        assert_eq!(g.get(late).unwrap(), &Tensor::zeros(&[1]));
    }

    #[test]
    fn embedding_gather_accumulates_repeated_rows() {
        let mut tape = Tape::new();
        let table = tape.param(Tensor::zeros(&[5, 3])).unwrap();
        let rows = tape.gather_rows(table, &[3, 3]).unwrap();
        let loss = tape.sum(rows).unwrap();
        let g = tape.backward(loss).unwrap();
        let gt = g.get(table).unwrap();
        assert_eq!(gt.row(3), &[2.0, 2.0, 2.0]);
        assert_eq!(gt.data().iter().sum::<f64>(), 6.0);
    }

    #[test]
    fn second_backward_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0)).unwrap();
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        assert!(matches!(tape.backward(y), Err(Error::TapeConsumed)));
        assert!(matches!(tape.param(Tensor::scalar(1.0)), Err(Error::TapeConsumed)));
        tape.clear();
        let x = tape.param(Tensor::scalar(2.0)).unwrap();
        let y = tape.mul(x, x).unwrap();
        assert_eq!(tape.backward(y).unwrap().get(x).unwrap().item(), 4.0);
    }

    #[test]
    fn backward_rejects_non_scalar_and_empty() {
        let mut tape = Tape::new();
        assert!(matches!(tape.backward(Var(0)), Err(Error::EmptyTape)));
        let x = tape.param(Tensor::zeros(&[2])).unwrap();
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn empty_gather_has_zero_rows() {
        let mut tape = Tape::new();
        let table = tape.param(Tensor::zeros(&[4, 3])).unwrap();
        let e = tape.gather_rows(table, &[]).unwrap();
        assert_eq!(tape.shape(e), &[0, 3]);
    }
}
