//! Greedy projection of relaxed outputs onto feasible node sets, and the
//! classical greedy baselines.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{complement, Graph};
use crate::problems::{build_qp, BinaryAssignment, ProblemClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedSolution {
    pub class: ProblemClass,
    pub n: usize,
    pub selected: Vec<usize>,
    /// Set size, which is the objective in the class's own sense.
    pub objective: f64,
    pub seconds: f64,
}

impl DecodedSolution {
    fn new(class: ProblemClass, n: usize, mut selected: Vec<usize>, start: Instant) -> Self {
        selected.sort_unstable();
        let objective = selected.len() as f64;
        Self { class, n, selected, objective, seconds: start.elapsed().as_secs_f64() }
    }

    pub fn assignment(&self) -> BinaryAssignment {
        BinaryAssignment::from_selected(self.n, &self.selected)
    }
}

fn check(g: &Graph, x_r: &[f64]) -> Result<()> {
    if x_r.len() != g.num_nodes() {
        return Err(Error::Dimension { expected: g.num_nodes(), got: x_r.len() });
    }
    if x_r.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("relaxed solution contains NaN".into()));
    }
    Ok(())
}

/// Node indices by descending score, ties by ascending index.
fn descending(x_r: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x_r.len()).collect();
    order.sort_by(|&a, &b| x_r[b].total_cmp(&x_r[a]).then(a.cmp(&b)));
    order
}

/// Node indices by ascending score, ties by ascending index.
fn ascending(x_r: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x_r.len()).collect();
    order.sort_by(|&a, &b| x_r[a].total_cmp(&x_r[b]).then(a.cmp(&b)));
    order
}

pub fn decode_mis(g: &Graph, x_r: &[f64]) -> Result<DecodedSolution> {
    check(g, x_r)?;
    let start = Instant::now();
    let mut blocked = vec![false; g.num_nodes()];
    let mut selected = Vec::new();
    for v in descending(x_r) {
        if !blocked[v] {
            selected.push(v);
            blocked[v] = true;
            g.neighbors(v).iter().for_each(|&u| blocked[u] = true);
        }
    }
    Ok(DecodedSolution::new(ProblemClass::Mis, g.num_nodes(), selected, start))
}

pub fn decode_mc(g: &Graph, x_r: &[f64]) -> Result<DecodedSolution> {
    check(g, x_r)?;
    let start = Instant::now();
    let mut selected: Vec<usize> = Vec::new();
    for v in descending(x_r) {
        if selected.iter().all(|&u| g.has_edge(u, v)) {
            selected.push(v);
        }
    }
    Ok(DecodedSolution::new(ProblemClass::Mc, g.num_nodes(), selected, start))
}

pub fn decode_mvc(g: &Graph, x_r: &[f64]) -> Result<DecodedSolution> {
    check(g, x_r)?;
    let start = Instant::now();
    let n = g.num_nodes();
    let mut in_set = vec![false; n];
    let mut uncovered = g.num_edges();
    for v in descending(x_r) {
        if uncovered == 0 {
            break;
        }
        in_set[v] = true;
        uncovered -= g.neighbors(v).iter().filter(|&&u| !in_set[u]).count();
    }
    for v in ascending(x_r) {
        if in_set[v] && g.neighbors(v).iter().all(|&u| in_set[u]) {
            in_set[v] = false;
        }
    }
    let selected = (0..n).filter(|&v| in_set[v]).collect();
    Ok(DecodedSolution::new(ProblemClass::Mvc, n, selected, start))
}

pub fn decode_mds(g: &Graph, x_r: &[f64]) -> Result<DecodedSolution> {
    check(g, x_r)?;
    let start = Instant::now();
    let n = g.num_nodes();
    let mut in_set = vec![false; n];
    // number of selected nodes in each closed neighborhood
    let mut cover = vec![0usize; n];
    let mut undominated = n;
    for v in descending(x_r) {
        if undominated == 0 {
            break;
        }
        in_set[v] = true;
        for w in std::iter::once(v).chain(g.neighbors(v).iter().copied()) {
            if cover[w] == 0 {
                undominated -= 1;
            }
            cover[w] += 1;
        }
    }
    for v in ascending(x_r) {
        let closed = || std::iter::once(v).chain(g.neighbors(v).iter().copied());
        if in_set[v] && closed().all(|w| cover[w] >= 2) {
            in_set[v] = false;
            closed().for_each(|w| cover[w] -= 1);
        }
    }
    let selected = (0..n).filter(|&v| in_set[v]).collect();
    Ok(DecodedSolution::new(ProblemClass::Mds, n, selected, start))
}

pub fn decode(cls: ProblemClass, g: &Graph, x_r: &[f64]) -> Result<DecodedSolution> {
    match cls {
        ProblemClass::Mis => decode_mis(g, x_r),
        ProblemClass::Mc => decode_mc(g, x_r),
        ProblemClass::Mvc => decode_mvc(g, x_r),
        ProblemClass::Mds => decode_mds(g, x_r),
    }
}

/// Minimum-degree greedy independent set: take the node of least remaining
/// degree, delete its closed neighborhood, repeat.
fn min_degree_mis(g: &Graph) -> Vec<usize> {
    let n = g.num_nodes();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut selected = Vec::new();
    while let Some(v) = (0..n).filter(|&v| alive[v]).min_by_key(|&v| (degree[v], v)) {
        selected.push(v);
        let mut removed = vec![v];
        removed.extend(g.neighbors(v).iter().copied().filter(|&u| alive[u]));
        for &r in &removed {
            alive[r] = false;
        }
        for &r in &removed {
            for &w in g.neighbors(r) {
                if alive[w] {
                    degree[w] -= 1;
                }
            }
        }
    }
    selected
}

/// Independent set of the complement graph found by minimum-degree greedy,
/// read as a clique of `g`.
pub fn greedy_baseline_mc(g: &Graph) -> DecodedSolution {
    let start = Instant::now();
    let selected = min_degree_mis(&complement(g));
    DecodedSolution::new(ProblemClass::Mc, g.num_nodes(), selected, start)
}

/// Repeatedly takes the vertex with the most uncovered incident edges.
pub fn greedy_baseline_mvc(g: &Graph) -> DecodedSolution {
    let start = Instant::now();
    let n = g.num_nodes();
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut in_set = vec![false; n];
    let mut selected = Vec::new();
    loop {
        let Some(v) = (0..n).filter(|&v| degree[v] > 0).max_by_key(|&v| (degree[v], std::cmp::Reverse(v))) else {
            break;
        };
        in_set[v] = true;
        selected.push(v);
        degree[v] = 0;
        for &u in g.neighbors(v) {
            if !in_set[u] {
                degree[u] -= 1;
            }
        }
    }
    DecodedSolution::new(ProblemClass::Mvc, n, selected, start)
}

/// Checks that a decoded set is feasible for its class.
pub fn is_feasible_solution(g: &Graph, sol: &DecodedSolution) -> Result<bool> {
    let qp = build_qp(g, sol.class);
    Ok(qp.is_feasible(&sol.assignment())?.feasible)
}

/// True when no single node can be added (MIS, MC) or removed (MVC, MDS)
/// without breaking feasibility.
pub fn is_locally_optimal(g: &Graph, sol: &DecodedSolution) -> Result<bool> {
    let qp = build_qp(g, sol.class);
    let mut x = sol.assignment();
    for v in 0..g.num_nodes() {
        let grow = matches!(sol.class, ProblemClass::Mis | ProblemClass::Mc);
        if x.get(v) == grow {
            continue;
        }
        x.set(v, grow);
        let ok = qp.is_feasible(&x)?.feasible;
        x.set(v, !grow);
        if ok {
            return Ok(false);
        }
    }
    Ok(true)
}
