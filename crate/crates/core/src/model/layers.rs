//! Message-passing layers with explicit reverse passes.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

#[derive(Debug, Clone, Copy)]
pub struct DenseRef<'a> {
    /// `in × out`
    pub w: ArrayView2<'a, f64>,
    pub b: ArrayView1<'a, f64>,
}

pub struct DenseGrad<'a> {
    pub w: ArrayViewMut2<'a, f64>,
    pub b: ArrayViewMut1<'a, f64>,
}

/// Sum-aggregation layer weights: the MLP applied after aggregation.
#[derive(Debug, Clone)]
pub struct SumMlpRef<'a> {
    pub mlp: Vec<DenseRef<'a>>,
}

/// Weighted graph-convolution weights: `root` acts on the receiving node,
/// `nbr` on the weighted neighbor sum.
#[derive(Debug, Clone, Copy)]
pub struct WeightedConvRef<'a> {
    pub root: ArrayView2<'a, f64>,
    pub nbr: ArrayView2<'a, f64>,
    pub bias: ArrayView1<'a, f64>,
}

pub(crate) fn affine(x: &ArrayView2<f64>, d: &DenseRef) -> Array2<f64> {
    let mut out = x.dot(&d.w);
    out += &d.b;
    out
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

/// Zeroes entries of `grad` whose pre-activation was not positive.
fn relu_backward(grad: &mut Array2<f64>, pre: &Array2<f64>) {
    grad.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
}

pub(crate) const NORM_EPS: f64 = 1e-5;

/// Row-wise standardization without learned scale or shift. Returns the
/// output and each row's `1/σ`.
pub(crate) fn row_norm_forward(x: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut y = x.clone();
    let d = x.ncols() as f64;
    let mut inv = Vec::with_capacity(x.nrows());
    for mut row in y.rows_mut() {
        let mu = row.sum() / d;
        row.mapv_inplace(|v| v - mu);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        let r = 1.0 / (var + NORM_EPS).sqrt();
        row.mapv_inplace(|v| v * r);
        inv.push(r);
    }
    (y, inv)
}

pub(crate) fn row_norm_backward(y: &ArrayView2<f64>, inv: &[f64], dy: &ArrayView2<f64>) -> Array2<f64> {
    let d = y.ncols() as f64;
    let mut dx = dy.to_owned();
    for ((mut g, yr), &r) in dx.rows_mut().into_iter().zip(y.rows()).zip(inv) {
        let mean_g = g.sum() / d;
        let mean_gy = g.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / d;
        g.zip_mut_with(&yr, |gi, &yi| *gi = r * (*gi - mean_g - yi * mean_gy));
    }
    dx
}

/// `out[dst] += w · h[src]` over directed weighted edges.
pub(crate) fn propagate(h: &ArrayView2<f64>, edges: &[(usize, usize, f64)], n_dst: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n_dst, h.ncols()));
    for &(s, d, w) in edges {
        out.row_mut(d).scaled_add(w, &h.row(s));
    }
    out
}

/// Transpose of [`propagate`].
pub(crate) fn propagate_back(g: &Array2<f64>, edges: &[(usize, usize, f64)], n_src: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n_src, g.ncols()));
    for &(s, d, w) in edges {
        out.row_mut(s).scaled_add(w, &g.row(d));
    }
    out
}

fn sum_aggregate(h: &ArrayView2<f64>, edges: &[(usize, usize)]) -> Array2<f64> {
    let mut out = h.to_owned();
    for &(u, v) in edges {
        out.row_mut(v).scaled_add(1.0, &h.row(u));
    }
    out
}

fn sum_aggregate_back(g: &Array2<f64>, edges: &[(usize, usize)]) -> Array2<f64> {
    let mut out = g.clone();
    for &(u, v) in edges {
        out.row_mut(u).scaled_add(1.0, &g.row(v));
    }
    out
}

fn accumulate_dense(grad: &mut DenseGrad, input: &Array2<f64>, d_out: &Array2<f64>) {
    general_mat_mul(1.0, &input.t(), d_out, 1.0, &mut grad.w);
    grad.b += &d_out.sum_axis(Axis(0));
}

pub(crate) struct SumMlpCache {
    /// Input of every dense layer; the first is the aggregated features.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of every dense layer.
    pre: Vec<Array2<f64>>,
    activate: bool,
}

/// `h'_v = MLP(h_v + Σ_{u→v} h_u)` with ReLU between the MLP layers and,
/// when `activate`, on the output.
pub fn sum_mlp_layer(h: ArrayView2<f64>, edges: &[(usize, usize)], p: &SumMlpRef, activate: bool) -> Array2<f64> {
    sum_mlp_forward(h, edges, p, activate).0
}

pub(crate) fn sum_mlp_forward(
    h: ArrayView2<f64>,
    edges: &[(usize, usize)],
    p: &SumMlpRef,
    activate: bool,
) -> (Array2<f64>, SumMlpCache) {
    let mut x = sum_aggregate(&h, edges);
    let mut inputs = Vec::with_capacity(p.mlp.len());
    let mut pre = Vec::with_capacity(p.mlp.len());
    let last = p.mlp.len() - 1;
    for (k, d) in p.mlp.iter().enumerate() {
        let z = affine(&x.view(), d);
        let mut a = z.clone();
        if k < last || activate {
            relu_inplace(&mut a);
        }
        inputs.push(std::mem::replace(&mut x, a));
        pre.push(z);
    }
    (x, SumMlpCache { inputs, pre, activate })
}

pub(crate) fn sum_mlp_backward(
    cache: &SumMlpCache,
    edges: &[(usize, usize)],
    p: &SumMlpRef,
    grads: &mut [DenseGrad],
    mut d: Array2<f64>,
) -> Array2<f64> {
    let last = p.mlp.len() - 1;
    if cache.activate {
        relu_backward(&mut d, &cache.pre[last]);
    }
    for k in (0..p.mlp.len()).rev() {
        accumulate_dense(&mut grads[k], &cache.inputs[k], &d);
        let mut d_in = d.dot(&p.mlp[k].w.t());
        if k > 0 {
            relu_backward(&mut d_in, &cache.pre[k - 1]);
        }
        d = d_in;
    }
    sum_aggregate_back(&d, edges)
}

pub(crate) struct ConvCache {
    h_dst: Array2<f64>,
    msg: Array2<f64>,
    pre: Array2<f64>,
    activate: bool,
}

/// `h'_v = root·h_v + nbr·Σ_{(u,v,w)} w·h_u + bias`, ReLU when `activate`.
///
/// `h_src` and `h_dst` may be the same node set (objective relation) or the
/// two sides of the bipartite constraint relation.
pub fn weighted_conv_layer(
    h_src: ArrayView2<f64>,
    h_dst: ArrayView2<f64>,
    edges: &[(usize, usize, f64)],
    p: &WeightedConvRef,
    activate: bool,
) -> Array2<f64> {
    conv_forward(h_src, h_dst, edges, p, activate).0
}

pub(crate) fn conv_forward(
    h_src: ArrayView2<f64>,
    h_dst: ArrayView2<f64>,
    edges: &[(usize, usize, f64)],
    p: &WeightedConvRef,
    activate: bool,
) -> (Array2<f64>, ConvCache) {
    let msg = propagate(&h_src, edges, h_dst.nrows());
    let mut pre = h_dst.dot(&p.root);
    general_mat_mul(1.0, &msg, &p.nbr, 1.0, &mut pre);
    pre += &p.bias;
    let mut out = pre.clone();
    if activate {
        relu_inplace(&mut out);
    }
    (out, ConvCache { h_dst: h_dst.to_owned(), msg, pre, activate })
}

pub(crate) struct ConvGrad<'a> {
    pub root: ArrayViewMut2<'a, f64>,
    pub nbr: ArrayViewMut2<'a, f64>,
    pub bias: ArrayViewMut1<'a, f64>,
}

/// Returns `(d h_dst, d h_src)`.
pub(crate) fn conv_backward(
    cache: &ConvCache,
    edges: &[(usize, usize, f64)],
    n_src: usize,
    p: &WeightedConvRef,
    grad: &mut ConvGrad,
    mut d: Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    if cache.activate {
        relu_backward(&mut d, &cache.pre);
    }
    general_mat_mul(1.0, &cache.h_dst.t(), &d, 1.0, &mut grad.root);
    general_mat_mul(1.0, &cache.msg.t(), &d, 1.0, &mut grad.nbr);
    grad.bias += &d.sum_axis(Axis(0));
    let d_dst = d.dot(&p.root.t());
    let d_msg = d.dot(&p.nbr.t());
    (d_dst, propagate_back(&d_msg, edges, n_src))
}
