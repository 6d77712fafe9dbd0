use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

/// Erdős–Rényi G(n, p): every unordered pair is included independently.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Parameter("node count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::from_canonical(n, edges))
}

/// Barabási–Albert preferential attachment seeded with an `m`-clique.
///
/// Each new node attaches to `m` distinct existing nodes chosen with
/// probability proportional to their current degree.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || m >= n {
        return Err(Error::Parameter(format!("attachments m = {m} must satisfy 1 <= m < n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (0..m).flat_map(|u| (u + 1..m).map(move |v| (u, v))).collect();
    // every edge endpoint appears once here, so uniform draws are degree-weighted
    let mut endpoints: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    for v in m..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.gen_range(0..v)
            } else {
                endpoints[rng.gen_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            endpoints.push(t);
            endpoints.push(v);
        }
    }
    Ok(Graph::from_canonical(n, edges))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    pub edge_edit_rate: f64,
    pub seed: u64,
}

/// Uniform edge rewiring: drops `round(rate * |E|)` edges and inserts as many
/// pairs that were non-edges in `g`.
pub fn perturb(g: &Graph, cfg: PerturbConfig) -> Result<Graph> {
    if !(0.0..1.0).contains(&cfg.edge_edit_rate) {
        return Err(Error::Parameter(format!(
            "edge_edit_rate {} outside [0, 1)",
            cfg.edge_edit_rate
        )));
    }
    if g.num_edges() == 0 {
        return Err(Error::Parameter("perturbation needs at least one edge".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let requested = (cfg.edge_edit_rate * g.num_edges() as f64).round() as usize;
    let mut non_edges = g.non_edges();
    let edits = requested.min(non_edges.len());
    if edits < requested {
        log::warn!(
            "perturb: only {} non-edges available, reducing edits from {requested} to {edits}",
            non_edges.len()
        );
    }
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut rng);
    edges.truncate(edges.len() - edits);
    non_edges.shuffle(&mut rng);
    edges.extend_from_slice(&non_edges[..edits]);
    Ok(Graph::from_canonical(g.num_nodes(), edges))
}
