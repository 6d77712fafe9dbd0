use std::time::Instant;

use super::{exact_value, result, Compiled, OracleResult, FEAS_TOL};
use crate::error::{Error, Result};
use crate::problems::{BinaryAssignment, QpInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbConfig {
    pub time_limit: f64,
    /// Optional cap on explored nodes, useful for runs that must not depend
    /// on machine speed.
    pub node_limit: Option<u64>,
}

impl BnbConfig {
    pub fn with_time_limit(time_limit: f64) -> Self {
        Self { time_limit, node_limit: None }
    }
}

const UNFIXED: i8 = -1;

struct Search<'a> {
    qp: &'a QpInstance,
    c: Compiled,
    val: Vec<i8>,
    /// Smallest reachable activity of every row given the current fixings.
    minact: Vec<f64>,
    /// `w_ii + Σ_{k fixed to 1} w_ik` for every variable.
    lin: Vec<f64>,
    partial: f64,
    trail: Vec<usize>,
    /// Unfixed variables by descending `|w_ii|`, ties by index.
    order: Vec<usize>,
    best: Option<(f64, BinaryAssignment)>,
    nodes: u64,
    start: Instant,
    cfg: BnbConfig,
    aborted: bool,
}

impl<'a> Search<'a> {
    fn new(qp: &'a QpInstance, cfg: BnbConfig) -> Self {
        let c = Compiled::new(qp);
        let n = c.n;
        let minact = c.rows.iter().map(|r| r.iter().map(|&(_, a)| a.min(0.0)).sum()).collect();
        let lin = (0..n).map(|i| c.wij(i, i)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| c.wij(b, b).abs().total_cmp(&c.wij(a, a).abs()).then(a.cmp(&b)));
        Self {
            qp,
            c,
            val: vec![UNFIXED; n],
            minact,
            lin,
            partial: 0.0,
            trail: Vec::new(),
            order,
            best: None,
            nodes: 0,
            start: Instant::now(),
            cfg,
            aborted: false,
        }
    }

    fn offer(&mut self, x: &BinaryAssignment) -> Result<()> {
        if let Some(v) = exact_value(self.qp, x)? {
            if self.best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                self.best = Some((v, x.clone()));
            }
        }
        Ok(())
    }

    /// Fixes `j` to `v`; false when some row can no longer be satisfied.
    fn fix(&mut self, j: usize, v: bool) -> bool {
        let vf = if v { 1.0 } else { 0.0 };
        self.val[j] = v as i8;
        self.trail.push(j);
        self.partial += vf * self.lin[j];
        if v && !self.c.diag_only {
            for k in 0..self.c.n {
                if k != j {
                    self.lin[k] += self.c.wij(j, k);
                }
            }
        }
        let mut ok = true;
        for &(e, a) in &self.c.cols[j] {
            self.minact[e] += a * vf - a.min(0.0);
            if self.minact[e] > self.c.b[e] + FEAS_TOL {
                ok = false;
            }
        }
        ok
    }

    fn unfix(&mut self, j: usize) {
        let v = self.val[j] == 1;
        let vf = if v { 1.0 } else { 0.0 };
        for &(e, a) in &self.c.cols[j] {
            self.minact[e] -= a * vf - a.min(0.0);
        }
        if v && !self.c.diag_only {
            for k in 0..self.c.n {
                if k != j {
                    self.lin[k] -= self.c.wij(j, k);
                }
            }
        }
        self.partial -= vf * self.lin[j];
        self.val[j] = UNFIXED;
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let j = self.trail.pop().expect("non-empty trail");
            self.unfix(j);
        }
    }

    /// Applies implied fixings on the given rows until nothing changes.
    fn propagate(&mut self, mut queue: Vec<usize>) -> bool {
        while let Some(e) = queue.pop() {
            let slack = self.c.b[e] - self.minact[e];
            let mut forced = Vec::new();
            for &(k, a) in &self.c.rows[e] {
                if self.val[k] != UNFIXED {
                    continue;
                }
                if a > 0.0 && a > slack + FEAS_TOL {
                    forced.push((k, false));
                } else if a < 0.0 && -a > slack + FEAS_TOL {
                    forced.push((k, true));
                }
            }
            for (k, v) in forced {
                if self.val[k] != UNFIXED {
                    if (self.val[k] == 1) != v {
                        return false;
                    }
                    continue;
                }
                if !self.fix(k, v) {
                    return false;
                }
                queue.extend(self.c.cols[k].iter().map(|&(r, _)| r));
            }
        }
        true
    }

    fn assign(&mut self, j: usize, v: bool) -> bool {
        if !self.fix(j, v) {
            return false;
        }
        let rows = self.c.cols[j].iter().map(|&(r, _)| r).collect();
        self.propagate(rows)
    }

    fn bound(&self) -> f64 {
        let n = self.c.n;
        let mut b = self.partial;
        for i in 0..n {
            if self.val[i] == UNFIXED {
                b += self.lin[i].min(0.0);
            }
        }
        if !self.c.diag_only {
            for i in 0..n {
                if self.val[i] != UNFIXED {
                    continue;
                }
                for k in i + 1..n {
                    if self.val[k] == UNFIXED {
                        b += self.c.wij(i, k).min(0.0);
                    }
                }
            }
        }
        b
    }

    fn pruned(&self, bound: f64) -> bool {
        match &self.best {
            None => false,
            Some((bv, _)) if self.c.integral => bound > bv - 1.0 + FEAS_TOL,
            Some((bv, _)) => bound >= bv - FEAS_TOL,
        }
    }

    fn out_of_budget(&self) -> bool {
        self.cfg.node_limit.is_some_and(|l| self.nodes >= l) || self.start.elapsed().as_secs_f64() >= self.cfg.time_limit
    }

    fn dfs(&mut self) -> Result<()> {
        if self.out_of_budget() {
            self.aborted = true;
            return Ok(());
        }
        self.nodes += 1;
        if self.pruned(self.bound()) {
            return Ok(());
        }
        let Some(&j) = self.order.iter().find(|&&i| self.val[i] == UNFIXED) else {
            let x = BinaryAssignment::new(self.val.iter().map(|&v| v == 1).collect());
            return self.offer(&x);
        };
        let first = self.lin[j] < 0.0;
        for v in [first, !first] {
            let mark = self.trail.len();
            if self.assign(j, v) {
                self.dfs()?;
            }
            self.undo_to(mark);
            if self.aborted {
                break;
            }
        }
        Ok(())
    }
}

/// Depth-first 0/1 search with row propagation and a separable lower bound.
pub fn branch_and_bound(qp: &QpInstance, time_limit_seconds: f64) -> Result<OracleResult> {
    branch_and_bound_with(qp, &BnbConfig::with_time_limit(time_limit_seconds), None)
}

/// As [`branch_and_bound`], optionally seeded with a warm start. An
/// infeasible warm start is ignored.
pub fn branch_and_bound_with(
    qp: &QpInstance,
    cfg: &BnbConfig,
    warm_start: Option<&BinaryAssignment>,
) -> Result<OracleResult> {
    if !(cfg.time_limit > 0.0) {
        return Err(Error::Parameter("time limit must be positive".into()));
    }
    let n = qp.num_vars();
    let mut s = Search::new(qp, *cfg);
    s.offer(&BinaryAssignment::zeros(n))?;
    s.offer(&BinaryAssignment::ones(n))?;
    if let Some(w) = warm_start {
        if w.len() != n {
            return Err(Error::Dimension { expected: n, got: w.len() });
        }
        s.offer(w)?;
    }
    let root_ok = s.c.rows.iter().enumerate().all(|(e, _)| s.minact[e] <= s.c.b[e] + FEAS_TOL);
    if root_ok && s.propagate((0..s.c.rows.len()).collect()) {
        s.dfs()?;
    }
    let proven = !s.aborted;
    let nodes = s.nodes;
    let start = s.start;
    let (_, x) = s.best.take().ok_or(Error::Infeasible)?;
    result(qp, x, proven, nodes, start)
}
