//! Simple undirected graphs, instance generators, structural node features
//! and the edge-list file format.

mod features;
mod generate;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use features::{structural_features, FeatureMatrix, NUM_VAR_FEATURES};
pub use generate::{generate_ba, generate_er, perturb, PerturbConfig};

/// Undirected simple graph on nodes `0..num_nodes`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted lexicographically.
/// Adjacency lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) references a node >= {num_nodes}"
                )));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self::from_canonical(num_nodes, canon))
    }

    /// Edges must already be deduplicated, loop-free and `u < v`.
    pub(crate) fn from_canonical(num_nodes: usize, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        let mut adj = vec![Vec::new(); num_nodes];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Self { num_nodes, edges, adj }
    }

    pub fn empty(num_nodes: usize) -> Result<Self> {
        Self::new(num_nodes, [])
    }

    pub fn complete(num_nodes: usize) -> Result<Self> {
        let edges = (0..num_nodes).flat_map(|u| (u + 1..num_nodes).map(move |v| (u, v)));
        Self::new(num_nodes, edges)
    }

    pub fn path(num_nodes: usize) -> Result<Self> {
        Self::new(num_nodes, (1..num_nodes).map(|v| (v - 1, v)))
    }

    /// Star with node 0 at the center and `leaves` leaves.
    pub fn star(leaves: usize) -> Result<Self> {
        Self::new(leaves + 1, (1..=leaves).map(|v| (0, v)))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.adj[u].binary_search(&v).is_ok()
    }

    /// Unordered pairs `(u, v)`, `u < v`, that are not edges, in
    /// lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_nodes;
        (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !self.has_edge(u, v))
            .collect()
    }

    /// Relabels node `i` to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::Dimension { expected: self.num_nodes, got: perm.len() });
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Parameter("relabeling is not a permutation".into()));
            }
        }
        Self::new(self.num_nodes, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }

    /// Canonical edge-list text: node count followed by one sorted edge per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(8 * (self.edges.len() + 1));
        writeln!(out, "{}", self.num_nodes).unwrap();
        for &(u, v) in &self.edges {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (header_line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing node count".into(),
        })?;
        let n: usize = header.parse().map_err(|_| Error::Parse {
            line: header_line,
            message: format!("invalid node count {header:?}"),
        })?;
        if n == 0 {
            return Err(Error::Parse { line: header_line, message: "node count must be positive".into() });
        }
        let mut edges = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let parse = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::Parse { line, message: format!("invalid node index {s:?}") })
            };
            if parts.len() != 2 {
                return Err(Error::Parse { line, message: format!("expected \"u v\", got {l:?}") });
            }
            let (u, v) = (parse(parts[0])?, parse(parts[1])?);
            let err = |message: String| Error::Parse { line, message };
            if u == v {
                return Err(err(format!("self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(err(format!("node index out of range (n = {n})")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(err(format!("duplicate edge ({u}, {v})")));
            }
            edges.push((u, v));
        }
        Self::new(n, edges)
    }

    /// SHA-256 of the canonical edge list, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_edge_list().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }
}

pub fn complement(g: &Graph) -> Graph {
    Graph::from_canonical(g.num_nodes(), g.non_edges())
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    Graph::parse_edge_list(&fs::read_to_string(path)?)
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, g.to_edge_list())?;
    Ok(())
}
