use std::collections::VecDeque;

use ndarray::Array2;

use super::Graph;

/// Columns: normalized degree, betweenness, clustering, normalized core index.
pub const NUM_VAR_FEATURES: usize = 4;

/// One row per node, `NUM_VAR_FEATURES` columns.
pub type FeatureMatrix = Array2<f64>;

pub fn structural_features(g: &Graph) -> FeatureMatrix {
    let n = g.num_nodes();
    let mut out = Array2::zeros((n, NUM_VAR_FEATURES));
    let betweenness = betweenness(g);
    let cores = core_numbers(g);
    let max_core = cores.iter().copied().max().unwrap_or(0);
    for v in 0..n {
        out[[v, 0]] = if n > 1 { g.degree(v) as f64 / (n - 1) as f64 } else { 0.0 };
        out[[v, 1]] = betweenness[v];
        out[[v, 2]] = clustering(g, v);
        out[[v, 3]] = if max_core > 0 { cores[v] as f64 / max_core as f64 } else { 0.0 };
    }
    out
}

/// Brandes betweenness, normalized by `(n-1)(n-2)/2` unordered pairs.
pub(crate) fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.num_nodes();
    let mut centrality = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        for v in 0..n {
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
            preds[v].clear();
        }
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // each unordered pair was accumulated from both endpoints
    let scale = if n > 2 { 1.0 / ((n - 1) * (n - 2)) as f64 } else { 1.0 };
    centrality.iter_mut().for_each(|c| *c *= scale);
    centrality
}

fn clustering(g: &Graph, v: usize) -> f64 {
    let nbrs = g.neighbors(v);
    let d = nbrs.len();
    if d < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if g.has_edge(a, b) {
                links += 1;
            }
        }
    }
    links as f64 / (d * (d - 1) / 2) as f64
}

/// Core number of every node by repeated minimum-degree peeling.
pub(crate) fn core_numbers(g: &Graph) -> Vec<usize> {
    let n = g.num_nodes();
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut removed = vec![false; n];
    let mut core = vec![0; n];
    let mut k = 0;
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !removed[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("a node remains");
        k = k.max(degree[v]);
        core[v] = k;
        removed[v] = true;
        for &u in g.neighbors(v) {
            if !removed[u] {
                degree[u] -= 1;
            }
        }
    }
    core
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::generate_er;

    /// Pair-dependency betweenness from all-pairs BFS distances and path
    /// counts: node v lies on a shortest s-t path iff d(s,v)+d(v,t)=d(s,t).
    fn brute_betweenness(g: &Graph) -> Vec<f64> {
        let n = g.num_nodes();
        let mut dist = vec![vec![usize::MAX; n]; n];
        let mut count = vec![vec![0.0f64; n]; n];
        for s in 0..n {
            dist[s][s] = 0;
            count[s][s] = 1.0;
            let mut frontier = vec![s];
            let mut d = 0;
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for &v in &frontier {
                    for &w in g.neighbors(v) {
                        if dist[s][w] == usize::MAX {
                            dist[s][w] = d + 1;
                            next.push(w);
                        }
                        if dist[s][w] == d + 1 {
                            count[s][w] += count[s][v];
                        }
                    }
                }
                next.sort_unstable();
                next.dedup();
                frontier = next;
                d += 1;
            }
        }
        let mut out = vec![0.0; n];
        for v in 0..n {
            for s in 0..n {
                for t in s + 1..n {
                    if s == v || t == v || dist[s][t] == usize::MAX {
                        continue;
                    }
                    if dist[s][v] != usize::MAX
                        && dist[v][t] != usize::MAX
                        && dist[s][v] + dist[v][t] == dist[s][t]
                    {
                        out[v] += count[s][v] * count[v][t] / count[s][t];
                    }
                }
            }
        }
        let scale = if n > 2 { 2.0 / ((n - 1) * (n - 2)) as f64 } else { 1.0 };
        out.iter().map(|x| x * scale).collect()
    }

    #[test]
    fn star_center_features() {
        let s = Graph::star(3).unwrap();
        let f = structural_features(&s);
        assert_eq!(f.row(0).to_vec(), vec![1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn complete_graph_features() {
        let f = structural_features(&Graph::complete(4).unwrap());
        for v in 0..4 {
            assert_eq!(f.row(v).to_vec(), vec![1.0, 0.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn isolated_node_features() {
        let g = Graph::new(4, [(0, 1), (1, 2)]).unwrap();
        let f = structural_features(&g);
        assert_eq!(f.row(3).to_vec(), vec![0.0; 4]);
        let single = structural_features(&Graph::empty(1).unwrap());
        assert_eq!(single.row(0).to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn path_betweenness_matches_brute_force() {
        for n in 1..=8 {
            let p = Graph::path(n).unwrap();
            let b = betweenness(&p);
            let brute = brute_betweenness(&p);
            for i in 0..n {
                assert!((b[i] - brute[i]).abs() < 1e-12);
                // interior node i separates i left and n-1-i right nodes
                if n > 2 {
                    let expected = (i * (n - 1 - i)) as f64 * 2.0 / ((n - 1) * (n - 2)) as f64;
                    assert!((b[i] - expected).abs() < 1e-12, "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn random_betweenness_matches_brute_force() {
        for seed in 0..30 {
            let g = generate_er(8, 0.35, seed).unwrap();
            let b = betweenness(&g);
            let brute = brute_betweenness(&g);
            for (x, y) in b.iter().zip(&brute) {
                assert!((x - y).abs() < 1e-12, "seed {seed}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn features_are_bounded() {
        for seed in 0..20 {
            let g = generate_er(15, 0.25, seed).unwrap();
            let f = structural_features(&g);
            assert!(f.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn core_numbers_small() {
        // triangle with a pendant: core 2 on the triangle, 1 on the pendant
        let g = Graph::new(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        assert_eq!(core_numbers(&g), vec![2, 2, 2, 1]);
    }
}
