//! Topic co-contribution graph, centrality, and intermediary topics.
//!
//! Two topics are joined when at least one user is significant (P(t|u) ≥ ε)
//! in both; the edge weight is the fraction of all users for which that
//! holds. Intermediary topics are the nodes whose centrality is at least the
//! median centrality of the graph.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_json, write_json};
use crate::error::{Error, Result};
use crate::topics::TopicVector;

/// Relative slack used when comparing centralities against the median, so
/// that values equal up to rounding count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityMethod {
    #[default]
    WeightedCloseness,
    CurrentFlowCloseness,
}

impl fmt::Display for CentralityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CentralityMethod::WeightedCloseness => "weighted_closeness",
            CentralityMethod::CurrentFlowCloseness => "current_flow_closeness",
        })
    }
}

impl FromStr for CentralityMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "weighted_closeness" => Ok(CentralityMethod::WeightedCloseness),
            "current_flow_closeness" => Ok(CentralityMethod::CurrentFlowCloseness),
            other => Err(format!("unknown centrality method {other:?}")),
        }
    }
}

/// Undirected weighted graph over topic ids `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicGraph {
    k: usize,
    epsilon: f64,
    n_users: usize,
    /// (i, j) with i < j → weight.
    edges: BTreeMap<(usize, usize), f64>,
    /// (i, j) with i < j → number of co-significant users.
    co_users: BTreeMap<(usize, usize), u32>,
}

impl TopicGraph {
    /// Builds a graph from explicit weighted edges. Self-loops and
    /// non-positive weights are rejected; duplicate pairs keep the last weight.
    pub fn from_edges(k: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(a, b, w) in edges {
            if a == b || a >= k || b >= k {
                return Err(Error::OutOfRange(format!(
                    "edge ({a}, {b}) in graph of {k} nodes"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::OutOfRange(format!("edge weight {w}")));
            }
            map.insert((a.min(b), a.max(b)), w);
        }
        Ok(TopicGraph {
            k,
            epsilon: 0.0,
            n_users: 0,
            edges: map,
            co_users: BTreeMap::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn user_count(&self) -> usize {
        self.n_users
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Weight of the edge between `a` and `b`, in either order.
    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn co_users(&self, a: usize, b: usize) -> u32 {
        self.co_users
            .get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(0)
    }

    /// Edges as (i, j, weight) with i < j, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.k];
        for (a, b, w) in self.edges() {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        adj
    }

    /// Connected components, each sorted, ordered by their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.k];
        let mut out = Vec::new();
        for start in 0..self.k {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(u, _) in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Copy with every edge weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for w in g.edges.values_mut() {
            *w *= factor;
        }
        g
    }
}

/// Builds the topic graph from all users' topic vectors.
pub fn build_graph(vectors: &[TopicVector], epsilon: f64) -> Result<TopicGraph> {
    let k = vectors.first().map_or(0, TopicVector::k);
    let mut co_users: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for v in vectors {
        if v.k() != k {
            return Err(Error::DimensionMismatch {
                left: v.k(),
                right: k,
            });
        }
        let sig: Vec<usize> = v.significant_topics(epsilon).into_iter().collect();
        for (x, &a) in sig.iter().enumerate() {
            for &b in &sig[x + 1..] {
                *co_users.entry((a, b)).or_default() += 1;
            }
        }
    }
    let n = vectors.len() as f64;
    let edges = co_users
        .iter()
        .map(|(&pair, &c)| (pair, c as f64 / n))
        .collect();
    Ok(TopicGraph {
        k,
        epsilon,
        n_users: vectors.len(),
        edges,
        co_users,
    })
}

#[derive(Copy, Clone, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path lengths with edge length `1 / weight`.
/// Unreachable nodes are `None`.
pub fn shortest_paths(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<Option<f64>> {
    let mut dist: Vec<Option<f64>> = vec![None; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(0.0);
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if dist[node].is_some_and(|best| d > best) {
            continue;
        }
        for &(next, w) in &adj[node] {
            let nd = d + 1.0 / w;
            if dist[next].is_none_or(|best| nd < best) {
                dist[next] = Some(nd);
                heap.push(Frontier {
                    dist: nd,
                    node: next,
                });
            }
        }
    }
    dist
}

/// Weighted closeness with Wasserman–Faust scaling for disconnected graphs:
/// `(r-1)/Σd · (r-1)/(n-1)` where `r` counts the nodes reachable from `v`
/// (including `v`). Isolated nodes score 0.
pub fn weighted_closeness(g: &TopicGraph) -> Vec<f64> {
    let n = g.node_count();
    let adj = g.adjacency();
    (0..n)
        .map(|v| {
            let dist = shortest_paths(&adj, v);
            let reach: Vec<f64> = dist.into_iter().flatten().collect();
            let r = reach.len();
            let total: f64 = reach.iter().sum();
            if r <= 1 || total <= 0.0 {
                return 0.0;
            }
            let others = (r - 1) as f64;
            (others / total) * (others / (n - 1) as f64)
        })
        .collect()
}

/// Current-flow (information) closeness on the largest connected component,
/// with conductance equal to edge weight: `(m-1) / Σ_u R(v, u)` where `R` is
/// the effective resistance and `m` the component size. Nodes outside that
/// component score 0.
pub fn current_flow_closeness(g: &TopicGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut out = vec![0.0; n];
    let Some(comp) = g
        .components()
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b[0].cmp(&a[0])))
    else {
        return out;
    };
    let m = comp.len();
    if m < 2 {
        return out;
    }
    let local: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // grounded Laplacian: drop the last node of the component
    let mut lap = DMatrix::<f64>::zeros(m - 1, m - 1);
    for (a, b, w) in g.edges() {
        let (Some(&i), Some(&j)) = (local.get(&a), local.get(&b)) else {
            continue;
        };
        for (x, y) in [(i, j), (j, i)] {
            if x < m - 1 {
                lap[(x, x)] += w;
                if y < m - 1 {
                    lap[(x, y)] -= w;
                }
            }
        }
    }
    let green = lap
        .cholesky()
        .expect("grounded Laplacian of a connected graph is positive definite")
        .inverse();
    let entry = |i: usize, j: usize| {
        if i == m - 1 || j == m - 1 {
            0.0
        } else {
            green[(i, j)]
        }
    };
    for (i, &v) in comp.iter().enumerate() {
        let total: f64 = (0..m)
            .filter(|&j| j != i)
            .map(|j| entry(i, i) + entry(j, j) - 2.0 * entry(i, j))
            .sum();
        out[v] = (m - 1) as f64 / total;
    }
    out
}

pub fn centrality(g: &TopicGraph, method: CentralityMethod) -> Vec<f64> {
    match method {
        CentralityMethod::WeightedCloseness => weighted_closeness(g),
        CentralityMethod::CurrentFlowCloseness => current_flow_closeness(g),
    }
}

/// Median of the values (mean of the two middle values for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

/// Whether `value` is at or above `threshold`, allowing rounding-level ties.
pub fn at_or_above(value: f64, threshold: f64) -> bool {
    value >= threshold - TIE_TOLERANCE * threshold.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermediaryTopicSet {
    pub topic_ids: BTreeSet<usize>,
    /// Indexed by topic id.
    pub centrality: Vec<f64>,
    /// Median centrality.
    pub threshold: f64,
    pub method: CentralityMethod,
}

impl IntermediaryTopicSet {
    /// Selects the topics with centrality at or above the median.
    pub fn from_centrality(centrality: Vec<f64>, method: CentralityMethod) -> Self {
        let threshold = median(&centrality).unwrap_or(0.0);
        let topic_ids = centrality
            .iter()
            .enumerate()
            .filter(|(_, &c)| at_or_above(c, threshold))
            .map(|(i, _)| i)
            .collect();
        IntermediaryTopicSet {
            topic_ids,
            centrality,
            threshold,
            method,
        }
    }

    pub fn contains(&self, topic: usize) -> bool {
        self.topic_ids.contains(&topic)
    }
}

pub fn intermediary_topics(g: &TopicGraph, method: CentralityMethod) -> IntermediaryTopicSet {
    IntermediaryTopicSet::from_centrality(centrality(g, method), method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub centrality: f64,
    pub intermediary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
    pub users: u32,
}

/// The graph document written by the `graph` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub k: usize,
    pub epsilon: f64,
    pub users: usize,
    pub method: CentralityMethod,
    pub threshold: f64,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub intermediary: Vec<usize>,
}

impl GraphReport {
    pub fn new(g: &TopicGraph, itset: &IntermediaryTopicSet) -> Self {
        GraphReport {
            k: g.node_count(),
            epsilon: g.epsilon(),
            users: g.user_count(),
            method: itset.method,
            threshold: itset.threshold,
            nodes: itset
                .centrality
                .iter()
                .enumerate()
                .map(|(id, &c)| GraphNode {
                    id,
                    centrality: c,
                    intermediary: itset.contains(id),
                })
                .collect(),
            edges: g
                .edges()
                .map(|(a, b, w)| GraphEdge {
                    source: a,
                    target: b,
                    weight: w,
                    users: g.co_users(a, b),
                })
                .collect(),
            intermediary: itset.topic_ids.iter().copied().collect(),
        }
    }

    pub fn intermediary_set(&self) -> IntermediaryTopicSet {
        IntermediaryTopicSet {
            topic_ids: self.intermediary.iter().copied().collect(),
            centrality: self.nodes.iter().map(|n| n.centrality).collect(),
            threshold: self.threshold,
            method: self.method,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}
