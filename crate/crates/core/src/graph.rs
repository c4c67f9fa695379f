// SPDX-License-Identifier: Apache-2.0

//! Undirected graph with non-negative edge weights.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IteratorRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{EdgeKey, NodeId};

/// Simple undirected graph whose edges carry a latency weight in milliseconds.
///
/// This is the shape of the analytical graph (latency graph minus the
/// client) and also what path enumeration runs on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    vertices: BTreeSet<NodeId>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    weights: BTreeMap<EdgeKey, f64>,
}

/// The analytical graph `G'(V', E')`.
pub type AnalyticalGraph = WeightedGraph;

impl WeightedGraph {
    pub fn new<I: IntoIterator<Item = NodeId>>(vertices: I) -> Self {
        let vertices: BTreeSet<NodeId> = vertices.into_iter().collect();
        let adjacency = vertices.iter().map(|&v| (v, BTreeSet::new())).collect();
        WeightedGraph {
            vertices,
            adjacency,
            weights: BTreeMap::new(),
        }
    }

    /// `K_n` over vertices `0..n` with unit weights.
    pub fn complete(n: u32) -> Self {
        let mut g = WeightedGraph::new((0..n).map(NodeId));
        for a in 0..n {
            for b in a + 1..n {
                g.add_edge(NodeId(a), NodeId(b), 1.0).expect("distinct known vertices");
            }
        }
        g
    }

    /// Uniform random graph with exactly `edges` edges over vertices `0..n`.
    pub fn random_with_edges<R: Rng + ?Sized>(n: u32, edges: usize, rng: &mut R) -> Self {
        let mut g = WeightedGraph::new((0..n).map(NodeId));
        let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        for (a, b) in pairs.choose_multiple(rng, edges) {
            g.add_edge(NodeId(a), NodeId(b), 1.0).expect("distinct known vertices");
        }
        g
    }

    pub fn add_vertex(&mut self, v: NodeId) {
        self.vertices.insert(v);
        self.adjacency.entry(v).or_default();
    }

    /// Adds or re-weights the edge `{a, b}`.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId, weight: f64) -> Result<()> {
        let key = EdgeKey::new(a, b)?;
        for v in [a, b] {
            if !self.vertices.contains(&v) {
                return Err(Error::UnknownVertex(v));
            }
        }
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidWeight(weight));
        }
        self.adjacency.get_mut(&a).expect("vertex").insert(b);
        self.adjacency.get_mut(&b).expect("vertex").insert(a);
        self.weights.insert(key, weight);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        let Ok(key) = EdgeKey::new(a, b) else {
            return false;
        };
        if self.weights.remove(&key).is_none() {
            return false;
        }
        self.adjacency.get_mut(&a).map(|s| s.remove(&b));
        self.adjacency.get_mut(&b).map(|s| s.remove(&a));
        true
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        EdgeKey::new(a, b).is_ok_and(|k| self.weights.contains_key(&k))
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> Option<f64> {
        EdgeKey::new(a, b).ok().and_then(|k| self.weights.get(&k).copied())
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&v).into_iter().flatten().copied()
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency.get(&v).map_or(0, BTreeSet::len)
    }

    pub fn vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeKey, f64)> + '_ {
        self.weights.iter().map(|(&k, &w)| (k, w))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    /// `2m / (n (n - 1))`, zero for graphs with fewer than two vertices.
    pub fn density(&self) -> f64 {
        let n = self.vertex_count() as f64;
        if n < 2.0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / (n * (n - 1.0))
    }

    /// Sum of edge weights along consecutive vertices, `None` if an edge is missing.
    pub fn path_weight(&self, path: &[NodeId]) -> Option<f64> {
        path.windows(2).map(|w| self.weight(w[0], w[1])).sum()
    }

    pub(crate) fn indexed(&self) -> Indexed {
        let ids: Vec<NodeId> = self.vertices.iter().copied().collect();
        let pos: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let adj = ids
            .iter()
            .map(|v| self.adjacency[v].iter().map(|w| pos[w]).collect())
            .collect();
        Indexed { ids, pos, adj }
    }
}

/// Dense index view used by the enumerators.
pub(crate) struct Indexed {
    pub ids: Vec<NodeId>,
    pub pos: BTreeMap<NodeId, usize>,
    pub adj: Vec<Vec<usize>>,
}

impl Indexed {
    pub fn index_of(&self, v: NodeId) -> Result<usize> {
        self.pos.get(&v).copied().ok_or(Error::UnknownVertex(v))
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn complete_graph_density_is_one() {
        let g = WeightedGraph::complete(6);
        assert_eq!(g.edge_count(), 15);
        assert_eq!(g.density(), 1.0);
        assert!(g.has_edge(NodeId(5), NodeId(0)));
    }

    #[test]
    fn edge_validation() {
        let mut g = WeightedGraph::new([NodeId(1), NodeId(2)]);
        assert!(g.add_edge(NodeId(1), NodeId(1), 1.0).is_err());
        assert!(g.add_edge(NodeId(1), NodeId(3), 1.0).is_err());
        assert!(g.add_edge(NodeId(1), NodeId(2), f64::NAN).is_err());
        g.add_edge(NodeId(2), NodeId(1), 4.0).unwrap();
        assert_eq!(g.weight(NodeId(1), NodeId(2)), Some(4.0));
        assert!(g.remove_edge(NodeId(1), NodeId(2)));
        assert_eq!(g.degree(NodeId(1)), 0);
    }

    #[test]
    fn random_graph_has_requested_edge_count() {
        let g = WeightedGraph::random_with_edges(10, 17, &mut seeded(3));
        assert_eq!(g.edge_count(), 17);
        assert_eq!(g.vertex_count(), 10);
    }

    #[test]
    fn path_weight_sums_edges() {
        let mut g = WeightedGraph::new((0..3).map(NodeId));
        g.add_edge(NodeId(0), NodeId(1), 10.0).unwrap();
        g.add_edge(NodeId(1), NodeId(2), 5.0).unwrap();
        assert_eq!(g.path_weight(&[NodeId(0), NodeId(1), NodeId(2)]), Some(15.0));
        assert_eq!(g.path_weight(&[NodeId(0), NodeId(2)]), None);
    }
}
