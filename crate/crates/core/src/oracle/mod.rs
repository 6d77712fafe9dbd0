//! Exact solving of small instances, approximation metrics, oracle caching,
//! warm-start export and the external solver contract.

mod adapter;
mod bnb;
mod cache;
mod mip_start;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{BinaryAssignment, QpInstance};

pub use adapter::{BranchAndBoundAdapter, CommandAdapter, SolverAdapter, SolverRegistry, DEFAULT_ADAPTER};
pub use bnb::{branch_and_bound, branch_and_bound_with, BnbConfig};
pub use cache::{CachedOptimum, OracleCache, CACHE_FORMAT, CACHE_VERSION};
pub use mip_start::{export_mip_start, format_g17, format_mip_start, parse_mip_start, MipStart, MipStartMode};

/// Largest instance accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_VARS: usize = 25;

/// Instances up to this size are solved by enumeration in [`solve_exact`].
const ENUMERATION_LIMIT: usize = 16;

/// Slack used while screening candidate points; accepted points are always
/// re-checked exactly.
pub(crate) const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub x_star: BinaryAssignment,
    /// Canonical minimization value.
    pub value_internal: f64,
    /// Value in the instance's original sense.
    pub value_reported: f64,
    pub proven_optimal: bool,
    pub nodes_explored: u64,
    pub seconds: f64,
}

/// Dense symmetric form of an instance shared by the exact solvers.
pub(crate) struct Compiled {
    pub n: usize,
    /// `w[i*n+j] = Q_ij + Q_ji` off the diagonal, `Q_ii + c_i` on it, so the
    /// objective is `Σ_i w_ii x_i + Σ_{i<j} w_ij x_i x_j`.
    pub w: Vec<f64>,
    pub diag_only: bool,
    pub integral: bool,
    /// Column view of `A`: `(row, coefficient)` per variable.
    pub cols: Vec<Vec<(usize, f64)>>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
}

impl Compiled {
    pub fn new(qp: &QpInstance) -> Self {
        let n = qp.num_vars();
        let mut w = vec![0.0; n * n];
        for (i, j, v) in qp.q().triplets() {
            if i == j {
                w[i * n + i] += v;
            } else {
                w[i * n + j] += v;
                w[j * n + i] += v;
            }
        }
        for (i, &c) in qp.c().iter().enumerate() {
            w[i * n + i] += c;
        }
        let diag_only = (0..n).all(|i| (0..n).all(|j| i == j || w[i * n + j] == 0.0));
        let integral = w.iter().all(|v| v.fract() == 0.0);
        let a = qp.a();
        let rows: Vec<Vec<(usize, f64)>> = (0..a.rows()).map(|e| a.row(e).collect()).collect();
        let mut cols = vec![Vec::new(); n];
        for (e, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                cols[j].push((e, v));
            }
        }
        Self { n, w, diag_only, integral, cols, rows, b: qp.b().to_vec() }
    }

    pub fn wij(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }
}

/// Exact value and feasibility of `x`, or `None` when infeasible.
pub(crate) fn exact_value(qp: &QpInstance, x: &BinaryAssignment) -> Result<Option<f64>> {
    if !qp.is_feasible(x)?.feasible {
        return Ok(None);
    }
    Ok(Some(qp.discrete_objective(x)?.internal))
}

pub(crate) fn result(qp: &QpInstance, x: BinaryAssignment, proven: bool, nodes: u64, start: Instant) -> Result<OracleResult> {
    let value = qp.discrete_objective(&x)?;
    Ok(OracleResult {
        x_star: x,
        value_internal: value.internal,
        value_reported: value.reported,
        proven_optimal: proven,
        nodes_explored: nodes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Exhaustive minimization over all `2^N` points in Gray-code order.
/// Ties go to the lexicographically smallest assignment.
pub fn brute_force(qp: &QpInstance) -> Result<OracleResult> {
    let n = qp.num_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::TooLarge(n, BRUTE_FORCE_MAX_VARS));
    }
    let start = Instant::now();
    let c = Compiled::new(qp);
    let mut x = vec![false; n];
    let mut act = vec![0.0; c.rows.len()];
    let mut violated = c.b.iter().filter(|&&b| b < -FEAS_TOL).count();
    let mut value = 0.0;
    let mut best: Option<(f64, Vec<bool>)> = None;

    let consider = |x: &[bool], value: f64, best: &mut Option<(f64, Vec<bool>)>| -> Result<()> {
        if let Some((bv, _)) = best {
            if value > *bv + FEAS_TOL {
                return Ok(());
            }
        }
        let cand = BinaryAssignment::new(x.to_vec());
        if let Some(v) = exact_value(qp, &cand)? {
            let better = match best {
                None => true,
                Some((bv, bx)) => v < *bv || (v == *bv && x < &bx[..]),
            };
            if better {
                *best = Some((v, x.to_vec()));
            }
        }
        Ok(())
    };

    if violated == 0 {
        consider(&x, value, &mut best)?;
    }
    for k in 1u64..(1u64 << n) {
        let j = k.trailing_zeros() as usize;
        let sign = if x[j] { -1.0 } else { 1.0 };
        let mut delta = c.wij(j, j);
        if !c.diag_only {
            delta += (0..n).filter(|&i| i != j && x[i]).map(|i| c.wij(i, j)).sum::<f64>();
        }
        value += sign * delta;
        x[j] = !x[j];
        for &(e, a) in &c.cols[j] {
            let was = act[e] > c.b[e] + FEAS_TOL;
            act[e] += sign * a;
            let is = act[e] > c.b[e] + FEAS_TOL;
            match (was, is) {
                (false, true) => violated += 1,
                (true, false) => violated -= 1,
                _ => {}
            }
        }
        if violated == 0 {
            consider(&x, value, &mut best)?;
        }
    }
    let (_, bits) = best.ok_or(Error::Infeasible)?;
    result(qp, BinaryAssignment::new(bits), true, 1u64 << n, start)
}

/// Certified optimum: enumeration for small instances, otherwise
/// branch-and-bound without a practical time limit.
pub fn solve_exact(qp: &QpInstance) -> Result<OracleResult> {
    if qp.num_vars() <= ENUMERATION_LIMIT {
        return brute_force(qp);
    }
    let r = branch_and_bound(qp, 3600.0)?;
    if !r.proven_optimal {
        log::warn!("branch-and-bound hit its time limit; oracle value is not certified");
    }
    Ok(r)
}

/// `value / optimal`, both in the original sense.
pub fn approx_ratio(value_reported: f64, optimal_reported: f64) -> Result<f64> {
    if optimal_reported == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(value_reported / optimal_reported)
}

/// Mean relative absolute gap `(1/K) Σ_k |v_k − v*_k| / |v*_k|`.
pub fn approx_gap(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Parameter("approximation gap needs at least one pair".into()));
    }
    let mut total = 0.0;
    for &(v, opt) in pairs {
        if opt == 0.0 {
            return Err(Error::UndefinedRatio);
        }
        total += (v - opt).abs() / opt.abs();
    }
    Ok(total / pairs.len() as f64)
}
