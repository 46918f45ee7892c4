use std::collections::HashMap;
use std::sync::Arc;

use super::tensor::{matmul_at_into, matmul_bt_into, matmul_into};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MulScalar(usize, usize),
    MulCol(usize, usize),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Softmax(usize, usize),
    Concat(Vec<usize>, usize),
    Sum(usize, Option<usize>),
    Mean(usize, Option<usize>),
    Max(usize, Vec<usize>),
    GatherRows(usize, Arc<[usize]>),
    ScatterAddRows(usize, Arc<[usize]>),
    ScaleRows(usize, Arc<[f64]>),
    SliceCols(usize, usize),
    Transpose(usize),
    Normalize(usize, f64),
    CrossEntropy {
        logits: usize,
        targets: Vec<u8>,
        weights: [f64; 2],
        probs: Vec<f64>,
    },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf | Param(_) => vec![],
            MatMul(a, b) | Add(a, b) | AddRow(a, b) | Mul(a, b) | MulScalar(a, b) | MulCol(a, b) => {
                vec![*a, *b]
            }
            Scale(a, _)
            | Relu(a)
            | Tanh(a)
            | Sigmoid(a)
            | Softmax(a, _)
            | Sum(a, _)
            | Mean(a, _)
            | Max(a, _)
            | GatherRows(a, _)
            | ScatterAddRows(a, _)
            | ScaleRows(a, _)
            | SliceCols(a, _)
            | Transpose(a)
            | Normalize(a, _) => vec![*a],
            Concat(xs, _) => xs.clone(),
            CrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by one backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    /// Gradient of the loss with respect to a leaf or parameter variable.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn params(&self) -> &[(ParamId, Tensor)] {
        &self.params
    }
}

/// Records one forward episode for reverse-mode differentiation. Parameters
/// are read from a borrowed [`ParamStore`] without copying.
#[derive(Debug)]
pub struct Tape<'p> {
    store: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
    consumed: bool,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn check_axis(op: &'static str, axis: usize, t: &Tensor) -> Result<()> {
    if axis > 1 {
        return Err(Error::Rank {
            op,
            shape: t.shape.clone(),
        });
    }
    Ok(())
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape {
            store: None,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            consumed: false,
        }
    }

    pub fn with_params(store: &'p ParamStore) -> Self {
        Tape {
            store: Some(store),
            ..Tape::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => &self.store.expect("param tape").get(*id).value,
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.value(v).shape
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = op.inputs().iter().any(|&i| self.nodes[i].needs_grad);
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that gradients are tracked for.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: Some(t),
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input excluded from differentiation.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: Some(t),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Variable for a stored parameter; repeated calls return the same handle.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(&id) {
            return *v;
        }
        assert!(self.store.is_some(), "tape has no parameter store");
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (n, k) = ta.dims();
        let (k2, m) = tb.dims();
        if k != k2 {
            return Err(Error::shape("matmul", &ta.shape, &tb.shape));
        }
        let mut out = vec![0.0; n * m];
        matmul_into(&ta.data, &tb.data, &mut out, n, k, m);
        Ok(self.push(Tensor { shape: vec![n, m], data: out }, Op::MatMul(a.0, b.0)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.dims() != tb.dims() {
            return Err(Error::shape(op, &ta.shape, &tb.shape));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Add(a.0, b.0)))
    }

    /// Adds a `1 x C` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let (_, c) = ta.dims();
        if tb.dims() != (1, c) {
            return Err(Error::shape("add_row", &ta.shape, &tb.shape));
        }
        let data = ta
            .data
            .iter()
            .enumerate()
            .map(|(i, x)| x + tb.data[i % c.max(1)])
            .collect();
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::AddRow(a.0, bias.0)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|x| x * c);
        self.push(t, Op::Scale(a.0, c))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    /// Multiplies every entry of `a` by the one-element variable `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let ts = self.value(s);
        if ts.len() != 1 {
            return Err(Error::shape("mul_scalar", &self.value(a).shape, &ts.shape));
        }
        let sv = ts.data[0];
        let t = self.value(a).map(|x| x * sv);
        Ok(self.push(t, Op::MulScalar(a.0, s.0)))
    }

    /// Scales row `i` of `a` (`N x C`) by `s[i]` where `s` is `N x 1`.
    pub fn mul_col(&mut self, a: Var, s: Var) -> Result<Var> {
        let (ta, ts) = (self.value(a), self.value(s));
        let (n, c) = ta.dims();
        if ts.dims() != (n, 1) {
            return Err(Error::shape("mul_col", &ta.shape, &ts.shape));
        }
        let data = ta
            .data
            .iter()
            .enumerate()
            .map(|(i, x)| x * ts.data[i / c.max(1)])
            .collect();
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::MulCol(a.0, s.0)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.max(0.0));
        self.push(t, Op::Relu(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::tanh);
        self.push(t, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        self.push(t, Op::Sigmoid(a.0))
    }

    /// Softmax along `axis` (0: each column sums to one, 1: each row).
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ta = self.value(a);
        check_axis("softmax", axis, ta)?;
        let (r, c) = ta.dims();
        let mut out = ta.data.clone();
        let (lanes, len, stride, step) = if axis == 1 { (r, c, c, 1) } else { (c, r, 1, c) };
        for l in 0..lanes {
            let idx = |k: usize| l * stride + k * step;
            let m = (0..len).map(|k| out[idx(k)]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for k in 0..len {
                let e = (out[idx(k)] - m).exp();
                out[idx(k)] = e;
                z += e;
            }
            for k in 0..len {
                out[idx(k)] /= z;
            }
        }
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data: out }, Op::Softmax(a.0, axis)))
    }

    /// Concatenates along `axis` (0: stack rows, 1: join columns).
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = match xs.first() {
            Some(v) => self.value(*v),
            None => return Err(Error::shape("concat", &[], &[])),
        };
        check_axis("concat", axis, first)?;
        let (r0, c0) = first.dims();
        for v in &xs[1..] {
            let t = self.value(*v);
            let (r, c) = t.dims();
            if (axis == 0 && c != c0) || (axis == 1 && r != r0) {
                return Err(Error::shape("concat", &first.shape, &t.shape));
            }
        }
        let tensors: Vec<&Tensor> = xs.iter().map(|v| self.value(*v)).collect();
        let out = if axis == 0 {
            let rows: usize = tensors.iter().map(|t| t.rows()).sum();
            let mut data = Vec::with_capacity(rows * c0);
            for t in &tensors {
                data.extend_from_slice(&t.data);
            }
            Tensor { shape: vec![rows, c0], data }
        } else {
            let cols: usize = tensors.iter().map(|t| t.cols()).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for i in 0..r0 {
                for t in &tensors {
                    data.extend_from_slice(t.row_slice(i));
                }
            }
            Tensor { shape: vec![r0, cols], data }
        };
        Ok(self.push(out, Op::Concat(xs.iter().map(|v| v.0).collect(), axis)))
    }

    fn reduce(&self, a: Var, axis: Option<usize>, scale_by_count: bool) -> Result<Tensor> {
        let ta = self.value(a);
        let (r, c) = ta.dims();
        let (shape, mut data) = match axis {
            None => (vec![1, 1], vec![ta.data.iter().sum::<f64>()]),
            Some(0) => {
                let mut s = vec![0.0; c];
                for i in 0..r {
                    for (o, x) in s.iter_mut().zip(ta.row_slice(i)) {
                        *o += x;
                    }
                }
                (vec![1, c], s)
            }
            Some(1) => (vec![r, 1], (0..r).map(|i| ta.row_slice(i).iter().sum()).collect()),
            Some(_) => {
                return Err(Error::Rank {
                    op: "reduce",
                    shape: ta.shape.clone(),
                })
            }
        };
        if scale_by_count {
            let n = match axis {
                None => r * c,
                Some(0) => r,
                _ => c,
            };
            if n > 0 {
                for v in &mut data {
                    *v /= n as f64;
                }
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Sum over all entries (`None`) or along an axis.
    pub fn sum(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        let t = self.reduce(a, axis, false)?;
        Ok(self.push(t, Op::Sum(a.0, axis)))
    }

    pub fn mean(&mut self, a: Var, axis: Option<usize>) -> Result<Var> {
        let t = self.reduce(a, axis, true)?;
        Ok(self.push(t, Op::Mean(a.0, axis)))
    }

    /// Maximum along `axis`; ties resolve to the lowest index.
    pub fn max(&mut self, a: Var, axis: usize) -> Result<Var> {
        let ta = self.value(a);
        check_axis("max", axis, ta)?;
        let (r, c) = ta.dims();
        if (axis == 0 && r == 0) || (axis == 1 && c == 0) {
            return Err(Error::shape("max", &ta.shape, &[]));
        }
        let (lanes, len) = if axis == 0 { (c, r) } else { (r, c) };
        let at = |l: usize, k: usize| if axis == 0 { k * c + l } else { l * c + k };
        let mut arg = Vec::with_capacity(lanes);
        let mut data = Vec::with_capacity(lanes);
        for l in 0..lanes {
            let mut best = 0;
            for k in 1..len {
                if ta.data[at(l, k)] > ta.data[at(l, best)] {
                    best = k;
                }
            }
            arg.push(at(l, best));
            data.push(ta.data[at(l, best)]);
        }
        let shape = if axis == 0 { vec![1, c] } else { vec![r, 1] };
        Ok(self.push(Tensor { shape, data }, Op::Max(a.0, arg)))
    }

    /// Row `k` of the output is row `indices[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, indices: impl Into<Arc<[usize]>>) -> Result<Var> {
        let indices = indices.into();
        let ta = self.value(a);
        let (r, c) = ta.dims();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices.iter() {
            if i >= r {
                return Err(Error::shape("gather_rows", &ta.shape, &[i]));
            }
            data.extend_from_slice(ta.row_slice(i));
        }
        let t = Tensor {
            shape: vec![indices.len(), c],
            data,
        };
        Ok(self.push(t, Op::GatherRows(a.0, indices)))
    }

    /// Output has `rows` rows; row `k` of `a` is added into row `indices[k]`.
    pub fn scatter_add_rows(
        &mut self,
        a: Var,
        indices: impl Into<Arc<[usize]>>,
        rows: usize,
    ) -> Result<Var> {
        let indices = indices.into();
        let ta = self.value(a);
        let (r, c) = ta.dims();
        if indices.len() != r {
            return Err(Error::shape("scatter_add_rows", &ta.shape, &[indices.len()]));
        }
        let mut data = vec![0.0; rows * c];
        for (k, &i) in indices.iter().enumerate() {
            if i >= rows {
                return Err(Error::shape("scatter_add_rows", &[rows, c], &[i]));
            }
            for (o, x) in data[i * c..(i + 1) * c].iter_mut().zip(ta.row_slice(k)) {
                *o += x;
            }
        }
        let t = Tensor {
            shape: vec![rows, c],
            data,
        };
        Ok(self.push(t, Op::ScatterAddRows(a.0, indices)))
    }

    /// Scales row `i` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: impl Into<Arc<[f64]>>) -> Result<Var> {
        let factors = factors.into();
        let ta = self.value(a);
        let (r, c) = ta.dims();
        if factors.len() != r {
            return Err(Error::shape("scale_rows", &ta.shape, &[factors.len()]));
        }
        let data = ta
            .data
            .iter()
            .enumerate()
            .map(|(i, x)| x * factors[i / c.max(1)])
            .collect();
        let shape = ta.shape.clone();
        Ok(self.push(Tensor { shape, data }, Op::ScaleRows(a.0, factors)))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims();
        if start > end || end > c {
            return Err(Error::shape("slice_cols", &ta.shape, &[start, end]));
        }
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&ta.row_slice(i)[start..end]);
        }
        let t = Tensor {
            shape: vec![r, end - start],
            data,
        };
        Ok(self.push(t, Op::SliceCols(a.0, start)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = self.value(a).transposed();
        self.push(t, Op::Transpose(a.0))
    }

    /// `a / ||a||` over all entries.
    pub fn normalize(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let n = ta.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateProjection);
        }
        let t = ta.map(|x| x / n);
        Ok(self.push(t, Op::Normalize(a.0, n)))
    }

    /// Class-weighted cross-entropy over `N x 2` logits:
    /// `(1/N) * sum_i w[y_i] * -log softmax(logits_i)[y_i]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[u8], weights: [f64; 2]) -> Result<Var> {
        let tl = self.value(logits);
        let (n, c) = tl.dims();
        if c != 2 || n != targets.len() || n == 0 {
            return Err(Error::shape("cross_entropy", &tl.shape, &[targets.len(), 2]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t > 1) {
            return Err(Error::Label(bad as i64));
        }
        let mut probs = Vec::with_capacity(2 * n);
        let mut loss = 0.0;
        for (i, &y) in targets.iter().enumerate() {
            let row = tl.row_slice(i);
            let m = row[0].max(row[1]);
            let lse = m + ((row[0] - m).exp() + (row[1] - m).exp()).ln();
            probs.push((row[0] - lse).exp());
            probs.push((row[1] - lse).exp());
            loss += weights[y as usize] * (lse - row[y as usize]);
        }
        loss /= n as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: logits.0,
                targets: targets.to_vec(),
                weights,
                probs,
            },
        ))
    }

    /// Reverse sweep from a one-element `loss`. A tape supports one backward
    /// pass.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let shape = self.value(loss).shape.clone();
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::Rank {
                op: "backward",
                shape,
            });
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(&shape, 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let mut params: Vec<(ParamId, Tensor)> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match node.op {
                Op::Param(id) => {
                    let g = grads[i]
                        .clone()
                        .unwrap_or_else(|| Tensor::zeros(&self.value(Var(i)).shape));
                    params.push((id, g));
                }
                Op::Leaf if node.needs_grad && grads[i].is_none() => {
                    grads[i] = Some(Tensor::zeros(&self.value(Var(i)).shape));
                }
                _ => {}
            }
        }
        params.sort_by_key(|(id, _)| *id);
        for (i, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf | Op::Param(_)) {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = self.value(Var(i));
        let mut send = |idx: usize, t: Tensor| {
            if !self.nodes[idx].needs_grad {
                return;
            }
            match &mut grads[idx] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        let like = |idx: usize, data: Vec<f64>| Tensor {
            shape: self.value(Var(idx)).shape.clone(),
            data,
        };
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(Var(*a)), self.value(Var(*b)));
                let (n, k) = ta.dims();
                let m = tb.cols();
                if self.nodes[*a].needs_grad {
                    let mut da = vec![0.0; n * k];
                    matmul_bt_into(&g.data, &tb.data, &mut da, n, m, k);
                    send(*a, like(*a, da));
                }
                if self.nodes[*b].needs_grad {
                    let mut db = vec![0.0; k * m];
                    matmul_at_into(&ta.data, &g.data, &mut db, n, k, m);
                    send(*b, like(*b, db));
                }
            }
            Op::Add(a, b) => {
                send(*a, like(*a, g.data.clone()));
                send(*b, like(*b, g.data.clone()));
            }
            Op::AddRow(a, b) => {
                send(*a, like(*a, g.data.clone()));
                let c = g.cols();
                let mut db = vec![0.0; c];
                for (k, v) in g.data.iter().enumerate() {
                    db[k % c] += v;
                }
                send(*b, like(*b, db));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(Var(*a)), self.value(Var(*b)));
                send(*a, like(*a, g.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect()));
                send(*b, like(*b, g.data.iter().zip(&ta.data).map(|(x, y)| x * y).collect()));
            }
            Op::Scale(a, c) => send(*a, like(*a, g.data.iter().map(|x| x * c).collect())),
            Op::MulScalar(a, s) => {
                let ta = self.value(Var(*a));
                let sv = self.value(Var(*s)).data[0];
                send(*a, like(*a, g.data.iter().map(|x| x * sv).collect()));
                let ds = g.data.iter().zip(&ta.data).map(|(x, y)| x * y).sum();
                send(*s, like(*s, vec![ds]));
            }
            Op::MulCol(a, s) => {
                let (ta, ts) = (self.value(Var(*a)), self.value(Var(*s)));
                let c = ta.cols().max(1);
                let da = g
                    .data
                    .iter()
                    .enumerate()
                    .map(|(k, x)| x * ts.data[k / c])
                    .collect();
                send(*a, like(*a, da));
                let mut ds = vec![0.0; ts.len()];
                for (k, (x, y)) in g.data.iter().zip(&ta.data).enumerate() {
                    ds[k / c] += x * y;
                }
                send(*s, like(*s, ds));
            }
            Op::Relu(a) => send(
                *a,
                like(
                    *a,
                    g.data
                        .iter()
                        .zip(&out.data)
                        .map(|(x, y)| if *y > 0.0 { *x } else { 0.0 })
                        .collect(),
                ),
            ),
            Op::Tanh(a) => send(
                *a,
                like(*a, g.data.iter().zip(&out.data).map(|(x, y)| x * (1.0 - y * y)).collect()),
            ),
            Op::Sigmoid(a) => send(
                *a,
                like(*a, g.data.iter().zip(&out.data).map(|(x, y)| x * y * (1.0 - y)).collect()),
            ),
            Op::Softmax(a, axis) => {
                let (r, c) = out.dims();
                let (lanes, len, stride, step) = if *axis == 1 { (r, c, c, 1) } else { (c, r, 1, c) };
                let mut da = vec![0.0; r * c];
                for l in 0..lanes {
                    let idx = |k: usize| l * stride + k * step;
                    let dot: f64 = (0..len).map(|k| g.data[idx(k)] * out.data[idx(k)]).sum();
                    for k in 0..len {
                        da[idx(k)] = out.data[idx(k)] * (g.data[idx(k)] - dot);
                    }
                }
                send(*a, like(*a, da));
            }
            Op::Concat(xs, axis) => {
                let (_, gc) = g.dims();
                let mut offset = 0;
                for &x in xs {
                    let (r, c) = self.value(Var(x)).dims();
                    let d = if *axis == 0 {
                        g.data[offset * gc..(offset + r) * gc].to_vec()
                    } else {
                        let mut d = Vec::with_capacity(r * c);
                        for i in 0..r {
                            d.extend_from_slice(&g.row_slice(i)[offset..offset + c]);
                        }
                        d
                    };
                    offset += if *axis == 0 { r } else { c };
                    send(x, like(x, d));
                }
            }
            Op::Sum(a, axis) | Op::Mean(a, axis) => {
                let (r, c) = self.value(Var(*a)).dims();
                let n = match (&self.nodes[i].op, axis) {
                    (Op::Sum(..), _) => 1,
                    (_, None) => r * c,
                    (_, Some(0)) => r,
                    _ => c,
                }
                .max(1) as f64;
                let da = (0..r * c)
                    .map(|k| {
                        let v = match axis {
                            None => g.data[0],
                            Some(0) => g.data[k % c],
                            _ => g.data[k / c],
                        };
                        v / n
                    })
                    .collect();
                send(*a, like(*a, da));
            }
            Op::Max(a, arg) => {
                let mut da = vec![0.0; self.value(Var(*a)).len()];
                for (k, &src) in arg.iter().enumerate() {
                    da[src] += g.data[k];
                }
                send(*a, like(*a, da));
            }
            Op::GatherRows(a, idx) => {
                let ta = self.value(Var(*a));
                let c = ta.cols();
                let mut da = vec![0.0; ta.len()];
                for (k, &r) in idx.iter().enumerate() {
                    for (o, x) in da[r * c..(r + 1) * c].iter_mut().zip(g.row_slice(k)) {
                        *o += x;
                    }
                }
                send(*a, like(*a, da));
            }
            Op::ScatterAddRows(a, idx) => {
                let mut da = Vec::with_capacity(self.value(Var(*a)).len());
                for &r in idx.iter() {
                    da.extend_from_slice(g.row_slice(r));
                }
                send(*a, like(*a, da));
            }
            Op::ScaleRows(a, f) => {
                let c = g.cols().max(1);
                send(
                    *a,
                    like(*a, g.data.iter().enumerate().map(|(k, x)| x * f[k / c]).collect()),
                );
            }
            Op::SliceCols(a, start) => {
                let (r, c) = self.value(Var(*a)).dims();
                let w = g.cols();
                let mut da = vec![0.0; r * c];
                for i in 0..r {
                    da[i * c + start..i * c + start + w].copy_from_slice(g.row_slice(i));
                }
                send(*a, like(*a, da));
            }
            Op::Transpose(a) => send(*a, like(*a, g.transposed().data)),
            Op::Normalize(a, n) => {
                let dot: f64 = g.data.iter().zip(&out.data).map(|(x, y)| x * y).sum();
                let da = g
                    .data
                    .iter()
                    .zip(&out.data)
                    .map(|(x, y)| (x - y * dot) / n)
                    .collect();
                send(*a, like(*a, da));
            }
            Op::CrossEntropy {
                logits,
                targets,
                weights,
                probs,
            } => {
                let n = targets.len() as f64;
                let gs = g.data[0];
                let mut d = probs.clone();
                for (k, &y) in targets.iter().enumerate() {
                    let w = weights[y as usize] * gs / n;
                    d[2 * k + y as usize] -= 1.0;
                    d[2 * k] *= w;
                    d[2 * k + 1] *= w;
                }
                send(*logits, like(*logits, d));
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
