use rand::Rng;

use super::features::{GraphInput, RelationEdges};
use super::ReadoutKind;
use crate::autodiff::{glorot_with, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Affine map `x W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Linear {
            w: store.add(format!("{name}.w"), glorot_with(rng, &[fan_in, fan_out]))?,
            b: store.add(format!("{name}.b"), Tensor::zeros(&[1, fan_out]))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (w, b) = (tape.param(self.w), tape.param(self.b));
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

fn check_relations(g: &GraphInput, expected: usize) -> Result<()> {
    if g.relations.len() > expected {
        return Err(Error::RelationIndex {
            id: g.relations.len() - 1,
            count: expected,
        });
    }
    Ok(())
}

/// Sum (or mean) of incoming neighbour rows for one relation.
fn aggregate(tape: &mut Tape, x: Var, rel: &RelationEdges, n: usize, mean: bool) -> Result<Var> {
    let gathered = tape.gather_rows(x, rel.src.clone())?;
    let summed = tape.scatter_add_rows(gathered, rel.dst.clone(), n)?;
    if mean {
        tape.scale_rows(summed, rel.inv_in_degree.clone())
    } else {
        Ok(summed)
    }
}

/// `Σ_r agg_r(X) W_r`, skipping relations without edges. Returns `None`
/// when the graph has no edges at all.
fn relation_messages(
    tape: &mut Tape,
    x: Var,
    g: &GraphInput,
    weights: &[ParamId],
    mean: bool,
) -> Result<Option<Var>> {
    check_relations(g, weights.len())?;
    let Some(&first) = weights.first() else {
        return Ok(None);
    };
    let n = g.num_nodes();
    let w0 = tape.param(first);
    let (fan_in, fan_out) = tape.value(w0).dims();
    let mut total: Option<Var> = None;
    for (rel, &w) in g.relations.iter().zip(weights) {
        let Some(rel) = rel else { continue };
        let w = tape.param(w);
        let msg = if fan_out < fan_in {
            let xw = tape.matmul(x, w)?;
            aggregate(tape, xw, rel, n, mean)?
        } else {
            let agg = aggregate(tape, x, rel, n, mean)?;
            tape.matmul(agg, w)?
        };
        total = Some(match total {
            Some(t) => tape.add(t, msg)?,
            None => msg,
        });
    }
    Ok(total)
}

/// Multi-relational graph convolution with per-relation mean aggregation:
/// `X'_i = act(X_i W_self + Σ_r mean_{j∈N_r(i)} X_j W_r + b)`.
#[derive(Debug, Clone)]
pub struct MrgcnLayer {
    pub w_self: ParamId,
    pub w_rel: Vec<ParamId>,
    pub b: ParamId,
    pub relu: bool,
}

impl MrgcnLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        num_relations: usize,
        relu: bool,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let w_self = store.add(format!("{name}.w_self"), glorot_with(rng, &[fan_in, fan_out]))?;
        let w_rel = (0..num_relations)
            .map(|r| store.add(format!("{name}.w_rel{r}"), glorot_with(rng, &[fan_in, fan_out])))
            .collect::<Result<_>>()?;
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[1, fan_out]))?;
        Ok(MrgcnLayer {
            w_self,
            w_rel,
            b,
            relu,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, g: &GraphInput) -> Result<Var> {
        let ws = tape.param(self.w_self);
        let mut h = tape.matmul(x, ws)?;
        if let Some(m) = relation_messages(tape, x, g, &self.w_rel, true)? {
            h = tape.add(h, m)?;
        }
        let b = tape.param(self.b);
        let h = tape.add_row(h, b)?;
        Ok(if self.relu { tape.relu(h) } else { h })
    }
}

/// Multi-relational graph isomorphism layer with sum aggregation:
/// `X'_i = MLP((1+ε) X_i + Σ_r Σ_{j∈N_r(i)} X_j W_r)`.
#[derive(Debug, Clone)]
pub struct MrginLayer {
    pub eps: ParamId,
    pub w_rel: Vec<ParamId>,
    pub mlp: [Linear; 2],
}

impl MrginLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        num_relations: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let eps = store.add(format!("{name}.eps"), Tensor::zeros(&[1, 1]))?;
        let w_rel = (0..num_relations)
            .map(|r| store.add(format!("{name}.w_rel{r}"), glorot_with(rng, &[fan_in, fan_in])))
            .collect::<Result<_>>()?;
        let l1 = Linear::new(store, &format!("{name}.mlp0"), fan_in, fan_out, rng)?;
        let l2 = Linear::new(store, &format!("{name}.mlp1"), fan_out, fan_out, rng)?;
        Ok(MrginLayer {
            eps,
            w_rel,
            mlp: [l1, l2],
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, g: &GraphInput) -> Result<Var> {
        let eps = tape.param(self.eps);
        let ex = tape.mul_scalar(x, eps)?;
        let mut h = tape.add(x, ex)?;
        if let Some(m) = relation_messages(tape, x, g, &self.w_rel, false)? {
            h = tape.add(h, m)?;
        }
        let h = self.mlp[0].forward(tape, h)?;
        let h = tape.relu(h);
        self.mlp[1].forward(tape, h)
    }
}

/// Indices of the `ceil(ratio * N)` highest scores, ties to the lower index,
/// returned in ascending index order.
pub fn select_top_k(scores: &[f64], ratio: f64) -> Vec<usize> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    let k = ((ratio * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept = order[..k].to_vec();
    kept.sort_unstable();
    kept
}

/// Pooled node set with the per-node attention scores.
#[derive(Debug, Clone)]
pub struct PoolOutput {
    /// Kept rows gated by their scores.
    pub x: Var,
    pub kept: Vec<usize>,
    /// `N x 1` tanh scores for every node.
    pub scores: Var,
    pub alpha: Vec<f64>,
}

/// Gathers the kept rows of `x` and scales them by their scores.
pub fn gate_rows(tape: &mut Tape, x: Var, scores: Var, kept: &[usize]) -> Result<Var> {
    let rows = tape.gather_rows(x, kept.to_vec())?;
    let s = tape.gather_rows(scores, kept.to_vec())?;
    tape.mul_col(rows, s)
}

fn finish_pool(tape: &mut Tape, x: Var, scores: Var, ratio: f64) -> Result<PoolOutput> {
    let alpha = tape.value(scores).data.clone();
    let kept = select_top_k(&alpha, ratio);
    let gated = gate_rows(tape, x, scores, &kept)?;
    Ok(PoolOutput {
        x: gated,
        kept,
        scores,
        alpha,
    })
}

/// Self-attention graph pooling scored by a one-output relational convolution.
#[derive(Debug, Clone)]
pub struct SagPool {
    pub scorer: MrgcnLayer,
    pub ratio: f64,
}

impl SagPool {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        num_relations: usize,
        ratio: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(SagPool {
            scorer: MrgcnLayer::new(store, name, fan_in, 1, num_relations, false, rng)?,
            ratio,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, g: &GraphInput) -> Result<PoolOutput> {
        let raw = self.scorer.forward(tape, x, g)?;
        let scores = tape.tanh(raw);
        finish_pool(tape, x, scores, self.ratio)
    }
}

/// Top-k pooling with scores `tanh(X p / ||p||)`.
#[derive(Debug, Clone)]
pub struct TopKPool {
    pub p: ParamId,
    pub ratio: f64,
}

impl TopKPool {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        ratio: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(TopKPool {
            p: store.add(format!("{name}.p"), glorot_with(rng, &[fan_in, 1]))?,
            ratio,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<PoolOutput> {
        let p = tape.param(self.p);
        let unit = tape.normalize(p)?;
        let proj = tape.matmul(x, unit)?;
        let scores = tape.tanh(proj);
        finish_pool(tape, x, scores, self.ratio)
    }
}

/// Column-wise reduction of node rows into a `1 x C` graph embedding.
pub fn readout(tape: &mut Tape, x: Var, kind: ReadoutKind) -> Result<Var> {
    let (rows, cols) = tape.value(x).dims();
    if rows == 0 {
        return Ok(tape.constant(Tensor::zeros(&[1, cols])));
    }
    match kind {
        ReadoutKind::Add => tape.sum(x, Some(0)),
        ReadoutKind::Mean => tape.mean(x, Some(0)),
        ReadoutKind::Max => tape.max(x, 0),
    }
}

/// Single-layer LSTM cell with gate blocks ordered `i, f, g, o`.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Lstm {
            w_ih: store.add(format!("{name}.w_ih"), glorot_with(rng, &[input, 4 * hidden]))?,
            w_hh: store.add(format!("{name}.w_hh"), glorot_with(rng, &[hidden, 4 * hidden]))?,
            b: store.add(format!("{name}.b"), Tensor::zeros(&[1, 4 * hidden]))?,
            hidden,
        })
    }

    /// Zero `(p_0, c_0)`.
    pub fn initial_state(&self, tape: &mut Tape) -> (Var, Var) {
        let p = tape.constant(Tensor::zeros(&[1, self.hidden]));
        let c = tape.constant(Tensor::zeros(&[1, self.hidden]));
        (p, c)
    }

    pub fn step(&self, tape: &mut Tape, x: Var, p: Var, c: Var) -> Result<(Var, Var)> {
        let h = self.hidden;
        let (w_ih, w_hh, b) = (tape.param(self.w_ih), tape.param(self.w_hh), tape.param(self.b));
        let xi = tape.matmul(x, w_ih)?;
        let ph = tape.matmul(p, w_hh)?;
        let z = tape.add(xi, ph)?;
        let z = tape.add_row(z, b)?;
        let i = tape.slice_cols(z, 0, h)?;
        let i = tape.sigmoid(i);
        let f = tape.slice_cols(z, h, 2 * h)?;
        let f = tape.sigmoid(f);
        let g = tape.slice_cols(z, 2 * h, 3 * h)?;
        let g = tape.tanh(g);
        let o = tape.slice_cols(z, 3 * h, 4 * h)?;
        let o = tape.sigmoid(o);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.tanh(c_next);
        let p_next = tape.mul(o, tc)?;
        Ok((p_next, c_next))
    }
}

/// Additive attention over LSTM outputs: `β = softmax(tanh(P W_a) v)`,
/// `z = βᵀ P`.
#[derive(Debug, Clone)]
pub struct TemporalAttention {
    pub w_a: ParamId,
    pub v: ParamId,
}

impl TemporalAttention {
    pub fn new(store: &mut ParamStore, name: &str, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(TemporalAttention {
            w_a: store.add(format!("{name}.w_a"), glorot_with(rng, &[hidden, hidden]))?,
            v: store.add(format!("{name}.v"), glorot_with(rng, &[hidden, 1]))?,
        })
    }

    /// Returns `(z, β)` with `z` of shape `1 x H` and `β` of shape `T x 1`.
    pub fn forward(&self, tape: &mut Tape, p: Var) -> Result<(Var, Var)> {
        let (w_a, v) = (tape.param(self.w_a), tape.param(self.v));
        let proj = tape.matmul(p, w_a)?;
        let act = tape.tanh(proj);
        let e = tape.matmul(act, v)?;
        let beta = tape.softmax(e, 0)?;
        let bt = tape.transpose(beta);
        let z = tape.matmul(bt, p)?;
        Ok((z, beta))
    }
}

/// Affine layers with ReLU between them and none after the last.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, dims: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}{i}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Mlp { layers })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(tape, h)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Inverted dropout with keep-scale `1 / (1 - p)`.
pub fn dropout(tape: &mut Tape, x: Var, p: f64, rng: &mut SeededRng) -> Result<Var> {
    if p <= 0.0 {
        return Ok(x);
    }
    let shape = tape.value(x).shape.clone();
    let n: usize = shape.iter().product();
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect();
    let m = tape.constant(Tensor::new(shape, mask)?);
    tape.mul(x, m)
}
