//! The heterogeneous graph fed to the model.
//!
//! Variable nodes carry structural features of the problem graph. Three
//! relations connect them: the problem graph itself, the objective graph
//! (off-diagonal couplings plus self-loops for the folded diagonal) and the
//! star expansion of the constraint hypergraph, where each `≤` row becomes a
//! constraint node linked to its variables with weight `a_ej`.

use std::fmt;

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::graphs::{structural_features, FeatureMatrix, Graph};
use crate::problems::QpInstance;
use crate::sparse::CsrMatrix;

/// Constraint node features: right-hand side and row arity.
pub const NUM_CONSTR_FEATURES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    pub num_var: usize,
    pub num_constr: usize,
    pub var_features: FeatureMatrix,
    pub constr_features: Array2<f64>,
    /// Problem-graph edges, stored once per unordered pair.
    pub e_prob: Vec<(usize, usize)>,
    /// `(i, j, Q_ij + Q_ji)` for `i < j`.
    pub e_obj_off: Vec<(usize, usize, f64)>,
    /// `(i, Q_ii + c_i)` for nonzero folded diagonal entries.
    pub e_obj_diag: Vec<(usize, f64)>,
    /// `(var j, constraint e, a_ej)`.
    pub e_constr: Vec<(usize, usize, f64)>,
}

/// `(Q̃, A, b)` recovered from a heterogeneous graph.
#[derive(Debug, Clone, PartialEq)]
pub struct QpMatrices {
    pub q_tilde: CsrMatrix,
    pub a: CsrMatrix,
    pub b: Vec<f64>,
}

pub fn encode(g: &Graph, qp: &QpInstance) -> Result<HeteroGraph> {
    let n = g.num_nodes();
    if qp.num_vars() != n {
        return Err(Error::Dimension { expected: n, got: qp.num_vars() });
    }
    let q_tilde = qp.q_tilde();
    let mut e_obj_off = Vec::new();
    let mut e_obj_diag = Vec::new();
    for (i, j, v) in q_tilde.triplets() {
        if i == j {
            e_obj_diag.push((i, v));
        } else if i < j {
            let w = v + q_tilde.get(j, i);
            if w != 0.0 {
                e_obj_off.push((i, j, w));
            }
        }
    }
    let m = qp.num_constraints();
    let mut constr_features = Array2::zeros((m, NUM_CONSTR_FEATURES));
    let mut e_constr = Vec::with_capacity(qp.a().nnz());
    for e in 0..m {
        constr_features[[e, 0]] = qp.b()[e];
        constr_features[[e, 1]] = qp.a().row_len(e) as f64;
        e_constr.extend(qp.a().row(e).map(|(j, a)| (j, e, a)));
    }
    Ok(HeteroGraph {
        num_var: n,
        num_constr: m,
        var_features: structural_features(g),
        constr_features,
        e_prob: g.edges().to_vec(),
        e_obj_off,
        e_obj_diag,
        e_constr,
    })
}

/// Exact reconstruction of `(Q̃, A, b)`; off-diagonal weights are split
/// evenly between `(i, j)` and `(j, i)`.
pub fn decode_qp(h: &HeteroGraph) -> QpMatrices {
    let mut q = Vec::with_capacity(2 * h.e_obj_off.len() + h.e_obj_diag.len());
    for &(i, j, w) in &h.e_obj_off {
        q.push((i, j, w / 2.0));
        q.push((j, i, w / 2.0));
    }
    q.extend(h.e_obj_diag.iter().map(|&(i, w)| (i, i, w)));
    let a: Vec<_> = h.e_constr.iter().map(|&(j, e, w)| (e, j, w)).collect();
    QpMatrices {
        q_tilde: CsrMatrix::from_triplets(h.num_var, h.num_var, &q).expect("valid objective edges"),
        a: CsrMatrix::from_triplets(h.num_constr, h.num_var, &a).expect("valid incidences"),
        b: h.constr_features.column(0).to_vec(),
    }
}

impl fmt::Display for HeteroGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variable nodes:      {}", self.num_var)?;
        writeln!(f, "constraint nodes:    {}", self.num_constr)?;
        writeln!(f, "problem edges:       {}", self.e_prob.len())?;
        writeln!(f, "objective off-diag:  {}", self.e_obj_off.len())?;
        writeln!(f, "objective self-loop: {}", self.e_obj_diag.len())?;
        write!(f, "constraint incid.:   {}", self.e_constr.len())
    }
}

/// Disjoint union of several heterogeneous graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedHeteroGraph {
    pub graph: HeteroGraph,
    pub var_offsets: Vec<usize>,
    pub constr_offsets: Vec<usize>,
    /// Member index of every variable node.
    pub var_instance: Vec<usize>,
    /// Member index of every constraint node.
    pub constr_instance: Vec<usize>,
    edge_counts: Vec<[usize; 4]>,
}

pub fn batch(members: &[HeteroGraph]) -> Result<BatchedHeteroGraph> {
    if members.is_empty() {
        return Err(Error::Parameter("cannot batch an empty list".into()));
    }
    let num_var: usize = members.iter().map(|m| m.num_var).sum();
    let num_constr: usize = members.iter().map(|m| m.num_constr).sum();
    let mut var_features = Array2::zeros((num_var, members[0].var_features.ncols()));
    let mut constr_features = Array2::zeros((num_constr, NUM_CONSTR_FEATURES));
    let mut out = HeteroGraph {
        num_var,
        num_constr,
        var_features: Array2::zeros((0, 0)),
        constr_features: Array2::zeros((0, 0)),
        e_prob: Vec::new(),
        e_obj_off: Vec::new(),
        e_obj_diag: Vec::new(),
        e_constr: Vec::new(),
    };
    let (mut var_offsets, mut constr_offsets) = (Vec::new(), Vec::new());
    let (mut var_instance, mut constr_instance) = (Vec::with_capacity(num_var), Vec::with_capacity(num_constr));
    let mut edge_counts = Vec::with_capacity(members.len());
    let (mut vo, mut co) = (0, 0);
    for (k, m) in members.iter().enumerate() {
        var_offsets.push(vo);
        constr_offsets.push(co);
        var_features.slice_mut(s![vo..vo + m.num_var, ..]).assign(&m.var_features);
        constr_features.slice_mut(s![co..co + m.num_constr, ..]).assign(&m.constr_features);
        out.e_prob.extend(m.e_prob.iter().map(|&(u, v)| (u + vo, v + vo)));
        out.e_obj_off.extend(m.e_obj_off.iter().map(|&(i, j, w)| (i + vo, j + vo, w)));
        out.e_obj_diag.extend(m.e_obj_diag.iter().map(|&(i, w)| (i + vo, w)));
        out.e_constr.extend(m.e_constr.iter().map(|&(j, e, a)| (j + vo, e + co, a)));
        var_instance.extend(std::iter::repeat(k).take(m.num_var));
        constr_instance.extend(std::iter::repeat(k).take(m.num_constr));
        edge_counts.push([m.e_prob.len(), m.e_obj_off.len(), m.e_obj_diag.len(), m.e_constr.len()]);
        vo += m.num_var;
        co += m.num_constr;
    }
    out.var_features = var_features;
    out.constr_features = constr_features;
    Ok(BatchedHeteroGraph { graph: out, var_offsets, constr_offsets, var_instance, constr_instance, edge_counts })
}

impl BatchedHeteroGraph {
    pub fn len(&self) -> usize {
        self.var_offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.var_offsets.is_empty()
    }

    pub fn num_var(&self) -> usize {
        self.graph.num_var
    }

    /// Variable-node range of member `k`.
    pub fn var_range(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.var_offsets.get(k + 1).copied().unwrap_or(self.graph.num_var);
        self.var_offsets[k]..end
    }

    pub fn constr_range(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.constr_offsets.get(k + 1).copied().unwrap_or(self.graph.num_constr);
        self.constr_offsets[k]..end
    }

    /// Sums `values` (one per variable node) per member.
    pub fn segment_sum(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (v, &k) in values.iter().zip(&self.var_instance) {
            out[k] += v;
        }
        out
    }

    pub fn unbatch(&self) -> Vec<HeteroGraph> {
        let g = &self.graph;
        let mut cursor = [0usize; 4];
        (0..self.len())
            .map(|k| {
                let vr = self.var_range(k);
                let cr = self.constr_range(k);
                let (vo, co) = (vr.start, cr.start);
                let counts = self.edge_counts[k];
                let take = |i: usize, cursor: &mut [usize; 4]| {
                    let r = cursor[i]..cursor[i] + counts[i];
                    cursor[i] += counts[i];
                    r
                };
                let (rp, ro, rd, rc) =
                    (take(0, &mut cursor), take(1, &mut cursor), take(2, &mut cursor), take(3, &mut cursor));
                HeteroGraph {
                    num_var: vr.len(),
                    num_constr: cr.len(),
                    var_features: g.var_features.slice(s![vr.clone(), ..]).to_owned(),
                    constr_features: g.constr_features.slice(s![cr.clone(), ..]).to_owned(),
                    e_prob: g.e_prob[rp].iter().map(|&(u, v)| (u - vo, v - vo)).collect(),
                    e_obj_off: g.e_obj_off[ro].iter().map(|&(i, j, w)| (i - vo, j - vo, w)).collect(),
                    e_obj_diag: g.e_obj_diag[rd].iter().map(|&(i, w)| (i - vo, w)).collect(),
                    e_constr: g.e_constr[rc].iter().map(|&(j, e, a)| (j - vo, e - co, a)).collect(),
                }
            })
            .collect()
    }
}
