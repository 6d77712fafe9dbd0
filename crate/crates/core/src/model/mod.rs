//! Relation-specific heterogeneous GNN.
//!
//! Three stacks compute variable embeddings independently: sum-aggregation
//! MLP layers on the problem graph, weighted convolutions on the objective
//! graph (self-loops included) and weighted convolutions that alternate
//! direction over the variable/constraint bipartite graph. The embeddings are
//! concatenated and a two-layer head followed by a logistic sigmoid maps each
//! variable to a selection probability.
//!
//! All parameters live in one flat vector; [`Layout`] records where each
//! tensor sits. Gradients use the same layout.

mod checkpoint;
mod layers;

use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{BatchedHeteroGraph, HeteroGraph, NUM_CONSTR_FEATURES};
use crate::error::{Error, Result};
use crate::graphs::NUM_VAR_FEATURES;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use layers::{sum_mlp_layer, weighted_conv_layer, DenseRef, SumMlpRef, WeightedConvRef};

use layers::{ConvCache, ConvGrad, DenseGrad, SumMlpCache};

/// Logits are clipped to this magnitude so the sigmoid stays strictly
/// inside (0, 1).
const LOGIT_CLIP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub layers_prob: usize,
    pub layers_obj: usize,
    pub layers_constr: usize,
    pub hidden_dim: usize,
    pub var_input_dim: usize,
    pub constr_input_dim: usize,
    /// Number of dense layers in each sum-aggregation MLP.
    pub mlp_depth: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers_prob: 6,
            layers_obj: 1,
            layers_constr: 6,
            hidden_dim: 64,
            var_input_dim: NUM_VAR_FEATURES,
            constr_input_dim: NUM_CONSTR_FEATURES,
            mlp_depth: 2,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Shallower 4/1/4 stacks used for small graphs.
    pub fn small() -> Self {
        Self { layers_prob: 4, layers_constr: 4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("layers_prob", self.layers_prob),
            ("layers_obj", self.layers_obj),
            ("layers_constr", self.layers_constr),
            ("hidden_dim", self.hidden_dim),
            ("var_input_dim", self.var_input_dim),
            ("constr_input_dim", self.constr_input_dim),
            ("mlp_depth", self.mlp_depth),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MatSlot {
    off: usize,
    rows: usize,
    cols: usize,
}

impl MatSlot {
    fn range(&self) -> Range<usize> {
        self.off..self.off + self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct VecSlot {
    off: usize,
    len: usize,
}

impl VecSlot {
    fn range(&self) -> Range<usize> {
        self.off..self.off + self.len
    }
}

#[derive(Debug, Clone, Copy)]
struct DenseSlot {
    w: MatSlot,
    b: VecSlot,
}

#[derive(Debug, Clone, Copy)]
struct ConvSlot {
    root: MatSlot,
    nbr: MatSlot,
    bias: VecSlot,
    /// Bipartite layers only: messages flow variable → constraint.
    to_constr: bool,
}

#[derive(Debug, Default)]
struct Alloc {
    next: usize,
}

impl Alloc {
    fn mat(&mut self, rows: usize, cols: usize) -> MatSlot {
        let s = MatSlot { off: self.next, rows, cols };
        self.next += rows * cols;
        s
    }

    fn vec(&mut self, len: usize) -> VecSlot {
        let s = VecSlot { off: self.next, len };
        self.next += len;
        s
    }

    fn dense(&mut self, rows: usize, cols: usize) -> DenseSlot {
        DenseSlot { w: self.mat(rows, cols), b: self.vec(cols) }
    }

    fn conv(&mut self, dst_dim: usize, src_dim: usize, out: usize, to_constr: bool) -> ConvSlot {
        ConvSlot { root: self.mat(dst_dim, out), nbr: self.mat(src_dim, out), bias: self.vec(out), to_constr }
    }
}

/// Positions of every tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Layout {
    prob: Vec<Vec<DenseSlot>>,
    obj: Vec<ConvSlot>,
    lift: DenseSlot,
    constr: Vec<ConvSlot>,
    head: [DenseSlot; 2],
    total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden_dim;
        let mut a = Alloc::default();
        let prob = (0..cfg.layers_prob)
            .map(|l| {
                let input = if l == 0 { cfg.var_input_dim } else { h };
                (0..cfg.mlp_depth).map(|k| a.dense(if k == 0 { input } else { h }, h)).collect()
            })
            .collect();
        let obj = (0..cfg.layers_obj)
            .map(|l| {
                let d = if l == 0 { cfg.var_input_dim } else { h };
                a.conv(d, d, h, false)
            })
            .collect();
        let lift = a.dense(cfg.constr_input_dim, h);
        let (mut var_dim, constr_dim) = (cfg.var_input_dim, h);
        let mut constr = Vec::with_capacity(cfg.layers_constr);
        for l in 0..cfg.layers_constr {
            // the final layer always writes variable embeddings
            let to_constr = (cfg.layers_constr - 1 - l) % 2 == 1;
            if to_constr {
                constr.push(a.conv(constr_dim, var_dim, h, true));
            } else {
                constr.push(a.conv(var_dim, constr_dim, h, false));
                var_dim = h;
            }
        }
        let head = [a.dense(3 * h, h), a.dense(h, 1)];
        Self { prob, obj, lift, constr, head, total: a.next }
    }

    pub fn num_params(&self) -> usize {
        self.total
    }

    /// Every weight matrix and bias vector as a range of the flat vector.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let dense = |d: &DenseSlot, out: &mut Vec<Range<usize>>| {
            out.push(d.w.range());
            out.push(d.b.range());
        };
        let conv = |c: &ConvSlot, out: &mut Vec<Range<usize>>| {
            out.push(c.root.range());
            out.push(c.nbr.range());
            out.push(c.bias.range());
        };
        self.prob.iter().flatten().for_each(|d| dense(d, &mut out));
        self.obj.iter().for_each(|c| conv(c, &mut out));
        dense(&self.lift, &mut out);
        self.constr.iter().for_each(|c| conv(c, &mut out));
        self.head.iter().for_each(|d| dense(d, &mut out));
        out
    }

    /// Weight matrices with their fan-in; biases are excluded.
    fn weights(&self) -> Vec<MatSlot> {
        let mut out = Vec::new();
        out.extend(self.prob.iter().flatten().map(|d| d.w));
        for c in self.obj.iter().chain(&self.constr) {
            out.push(c.root);
            out.push(c.nbr);
        }
        out.push(self.lift.w);
        out.extend(self.head.iter().map(|d| d.w));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    data: Vec<f64>,
}

/// Fan-in scaled uniform weights `U(-1/√fan_in, 1/√fan_in)`, zero biases.
pub fn init_model(cfg: &ModelConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let mut data = vec![0.0; layout.num_params()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for w in layout.weights() {
        let bound = 1.0 / (w.rows as f64).sqrt();
        for v in &mut data[w.range()] {
            *v = rng.gen_range(-bound..bound);
        }
    }
    Ok(ModelParams { config: *cfg, data })
}

impl ModelParams {
    pub fn from_flat(config: ModelConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = Layout::new(&config).num_params();
        if data.len() != expected {
            return Err(Error::Dimension { expected, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        Ok(Self { config, data })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Per-variable selection probabilities, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution(pub Vec<f64>);

impl RelaxedSolution {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn mat<'a>(data: &'a [f64], s: MatSlot) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((s.rows, s.cols), &data[s.range()]).expect("slot shape")
}

fn vector<'a>(data: &'a [f64], s: VecSlot) -> ArrayView1<'a, f64> {
    ArrayView1::from(&data[s.range()])
}

fn dense_ref<'a>(data: &'a [f64], d: &DenseSlot) -> DenseRef<'a> {
    DenseRef { w: mat(data, d.w), b: vector(data, d.b) }
}

fn conv_ref<'a>(data: &'a [f64], c: &ConvSlot) -> WeightedConvRef<'a> {
    WeightedConvRef { root: mat(data, c.root), nbr: mat(data, c.nbr), bias: vector(data, c.bias) }
}

/// Splits `buf` (which starts at flat offset `base`) into the given
/// increasing, non-overlapping `(offset, len)` parts.
fn carve<'a>(mut buf: &'a mut [f64], mut base: usize, parts: &[(usize, usize)]) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(parts.len());
    for &(off, len) in parts {
        let (_, rest) = std::mem::take(&mut buf).split_at_mut(off - base);
        let (part, rest) = rest.split_at_mut(len);
        out.push(part);
        buf = rest;
        base = off + len;
    }
    out
}

fn mat_mut(buf: &mut [f64], s: MatSlot) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((s.rows, s.cols), buf).expect("slot shape")
}

fn dense_grads<'a>(grad: &'a mut [f64], slots: &[DenseSlot]) -> Vec<DenseGrad<'a>> {
    let parts: Vec<(usize, usize)> =
        slots.iter().flat_map(|d| [(d.w.off, d.w.rows * d.w.cols), (d.b.off, d.b.len)]).collect();
    let mut pieces = carve(grad, 0, &parts).into_iter();
    slots
        .iter()
        .map(|d| DenseGrad {
            w: mat_mut(pieces.next().unwrap(), d.w),
            b: ArrayViewMut1::from(pieces.next().unwrap()),
        })
        .collect()
}

fn conv_grad<'a>(grad: &'a mut [f64], c: &ConvSlot) -> ConvGrad<'a> {
    let parts =
        [(c.root.off, c.root.rows * c.root.cols), (c.nbr.off, c.nbr.rows * c.nbr.cols), (c.bias.off, c.bias.len)];
    let mut pieces = carve(grad, 0, &parts).into_iter();
    ConvGrad {
        root: mat_mut(pieces.next().unwrap(), c.root),
        nbr: mat_mut(pieces.next().unwrap(), c.nbr),
        bias: ArrayViewMut1::from(pieces.next().unwrap()),
    }
}

/// Directed edge lists used by every stack, built once per pass.
struct Edges {
    prob: Vec<(usize, usize)>,
    obj: Vec<(usize, usize, f64)>,
    var_to_constr: Vec<(usize, usize, f64)>,
    constr_to_var: Vec<(usize, usize, f64)>,
}

impl Edges {
    fn new(h: &HeteroGraph) -> Self {
        let prob = h.e_prob.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
        let mut obj: Vec<_> = h.e_obj_off.iter().flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)]).collect();
        obj.extend(h.e_obj_diag.iter().map(|&(i, w)| (i, i, w)));
        let var_to_constr = h.e_constr.clone();
        let constr_to_var = h.e_constr.iter().map(|&(j, e, a)| (e, j, a)).collect();
        Self { prob, obj, var_to_constr, constr_to_var }
    }
}

struct Pass {
    edges: Edges,
    prob: Vec<SumMlpCache>,
    obj: Vec<ConvCache>,
    constr: Vec<ConvCache>,
    /// `1/σ` per row of each normalized relation embedding.
    inv_std: [Vec<f64>; 3],
    head_in: Array2<f64>,
    head_pre: Array2<f64>,
    logits: Vec<f64>,
    x: Vec<f64>,
}

fn check_input(cfg: &ModelConfig, h: &HeteroGraph) -> Result<()> {
    if h.var_features.ncols() != cfg.var_input_dim || h.var_features.nrows() != h.num_var {
        return Err(Error::Config(format!(
            "variable features are {}x{}, model expects {} columns for {} nodes",
            h.var_features.nrows(),
            h.var_features.ncols(),
            cfg.var_input_dim,
            h.num_var
        )));
    }
    if h.constr_features.ncols() != cfg.constr_input_dim && h.num_constr > 0 {
        return Err(Error::Config(format!(
            "constraint features have {} columns, model expects {}",
            h.constr_features.ncols(),
            cfg.constr_input_dim
        )));
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn forward_pass(params: &ModelParams, h: &HeteroGraph) -> Result<Pass> {
    let cfg = &params.config;
    check_input(cfg, h)?;
    let layout = params.layout();
    let data = &params.data[..];
    let edges = Edges::new(h);
    let x0 = h.var_features.view();

    let mut prob = Vec::with_capacity(layout.prob.len());
    let mut hp = x0.to_owned();
    for (l, slots) in layout.prob.iter().enumerate() {
        let p = SumMlpRef { mlp: slots.iter().map(|d| dense_ref(data, d)).collect() };
        let (out, cache) = layers::sum_mlp_forward(hp.view(), &edges.prob, &p, l + 1 < layout.prob.len());
        prob.push(cache);
        hp = out;
    }

    let mut obj = Vec::with_capacity(layout.obj.len());
    let mut ho = x0.to_owned();
    for (l, c) in layout.obj.iter().enumerate() {
        let (out, cache) =
            layers::conv_forward(ho.view(), ho.view(), &edges.obj, &conv_ref(data, c), l + 1 < layout.obj.len());
        obj.push(cache);
        ho = out;
    }

    let constr_in = if h.num_constr > 0 {
        h.constr_features.view()
    } else {
        ArrayView2::from_shape((0, cfg.constr_input_dim), &[]).expect("empty view")
    };
    let mut hc = layers::affine(&constr_in, &dense_ref(data, &layout.lift));
    let mut hv = x0.to_owned();
    let mut constr = Vec::with_capacity(layout.constr.len());
    for (l, c) in layout.constr.iter().enumerate() {
        let activate = l + 1 < layout.constr.len();
        let p = conv_ref(data, c);
        if c.to_constr {
            let (out, cache) = layers::conv_forward(hv.view(), hc.view(), &edges.var_to_constr, &p, activate);
            hc = out;
            constr.push(cache);
        } else {
            let (out, cache) = layers::conv_forward(hc.view(), hv.view(), &edges.constr_to_var, &p, activate);
            hv = out;
            constr.push(cache);
        }
    }

    let (hp, inv_p) = layers::row_norm_forward(&hp);
    let (ho, inv_o) = layers::row_norm_forward(&ho);
    let (hv, inv_v) = layers::row_norm_forward(&hv);
    let head_in = concatenate(Axis(1), &[hp.view(), ho.view(), hv.view()]).expect("equal row counts");
    let head_pre = layers::affine(&head_in.view(), &dense_ref(data, &layout.head[0]));
    let head_act = head_pre.mapv(|v| v.max(0.0));
    let logits_arr = layers::affine(&head_act.view(), &dense_ref(data, &layout.head[1]));
    let logits: Vec<f64> = logits_arr.column(0).to_vec();
    let x = logits.iter().map(|&z| sigmoid(z.clamp(-LOGIT_CLIP, LOGIT_CLIP))).collect();
    Ok(Pass { edges, prob, obj, constr, inv_std: [inv_p, inv_o, inv_v], head_in, head_pre, logits, x })
}

fn backward(params: &ModelParams, h: &HeteroGraph, pass: &Pass, dx: &[f64]) -> Vec<f64> {
    let layout = params.layout();
    let data = &params.data[..];
    let hd = params.config.hidden_dim;
    let n = h.num_var;
    let mut grad = vec![0.0; layout.num_params()];

    let mut d_logit = Array2::zeros((n, 1));
    for v in 0..n {
        let z = pass.logits[v];
        if z.abs() < LOGIT_CLIP {
            let x = pass.x[v];
            d_logit[[v, 0]] = dx[v] * x * (1.0 - x);
        }
    }
    let head_act = pass.head_pre.mapv(|v| v.max(0.0));
    let d_head_in = {
        let mut g = dense_grads(&mut grad, &layout.head);
        let (g0, g1) = g.split_at_mut(1);
        ndarray::linalg::general_mat_mul(1.0, &head_act.t(), &d_logit, 1.0, &mut g1[0].w);
        g1[0].b += &d_logit.sum_axis(Axis(0));
        let mut d_act = d_logit.dot(&mat(data, layout.head[1].w).t());
        d_act.zip_mut_with(&pass.head_pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        ndarray::linalg::general_mat_mul(1.0, &pass.head_in.t(), &d_act, 1.0, &mut g0[0].w);
        g0[0].b += &d_act.sum_axis(Axis(0));
        d_act.dot(&mat(data, layout.head[0].w).t())
    };
    let block = |k: usize| {
        let cols = s![.., k * hd..(k + 1) * hd];
        layers::row_norm_backward(&pass.head_in.slice(cols), &pass.inv_std[k], &d_head_in.slice(cols))
    };

    let mut d = block(0);
    for (l, slots) in layout.prob.iter().enumerate().rev() {
        let p = SumMlpRef { mlp: slots.iter().map(|s| dense_ref(data, s)).collect() };
        let mut g = dense_grads(&mut grad, slots);
        d = layers::sum_mlp_backward(&pass.prob[l], &pass.edges.prob, &p, &mut g, d);
    }

    let mut d = block(1);
    for (l, c) in layout.obj.iter().enumerate().rev() {
        let mut g = conv_grad(&mut grad, c);
        let (d_dst, d_src) = layers::conv_backward(&pass.obj[l], &pass.edges.obj, n, &conv_ref(data, c), &mut g, d);
        d = d_dst + d_src;
    }

    let mut dv = block(2);
    let mut dc: Array2<f64> = Array2::zeros((h.num_constr, hd));
    for (l, c) in layout.constr.iter().enumerate().rev() {
        let mut g = conv_grad(&mut grad, c);
        let p = conv_ref(data, c);
        if c.to_constr {
            let (d_dst, d_src) = layers::conv_backward(&pass.constr[l], &pass.edges.var_to_constr, n, &p, &mut g, dc);
            dc = d_dst;
            dv = if dv.ncols() == d_src.ncols() { dv + d_src } else { d_src };
        } else {
            let (d_dst, d_src) =
                layers::conv_backward(&pass.constr[l], &pass.edges.constr_to_var, h.num_constr, &p, &mut g, dv);
            dv = d_dst;
            dc = dc + d_src;
        }
    }
    if h.num_constr > 0 {
        let mut g = dense_grads(&mut grad, std::slice::from_ref(&layout.lift));
        ndarray::linalg::general_mat_mul(1.0, &h.constr_features.t(), &dc, 1.0, &mut g[0].w);
        g[0].b += &dc.sum_axis(Axis(0));
    }
    grad
}

pub fn forward(params: &ModelParams, h: &HeteroGraph) -> Result<RelaxedSolution> {
    Ok(RelaxedSolution(forward_pass(params, h)?.x))
}

pub fn forward_batch(params: &ModelParams, b: &BatchedHeteroGraph) -> Result<RelaxedSolution> {
    forward(params, &b.graph)
}

/// Result of a reverse-mode pass.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub loss: f64,
    pub x_r: RelaxedSolution,
    /// Flattened in parameter layout order.
    pub grad: Vec<f64>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        l2_norm(&self.grad)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Reverse-mode gradient of `loss_fn(forward(params, h))` with respect to
/// every parameter. `loss_fn` returns the loss and its gradient in `x_r`.
pub fn gradient<F>(params: &ModelParams, h: &HeteroGraph, loss_fn: F) -> Result<Gradient>
where
    F: FnOnce(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let pass = forward_pass(params, h)?;
    let (loss, dx) = loss_fn(&pass.x)?;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("loss is {loss}")));
    }
    if dx.len() != h.num_var {
        return Err(Error::Dimension { expected: h.num_var, got: dx.len() });
    }
    if dx.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite loss gradient".into()));
    }
    let grad = backward(params, h, &pass, &dx);
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite parameter gradient".into()));
    }
    Ok(Gradient { loss, x_r: RelaxedSolution(pass.x), grad })
}
