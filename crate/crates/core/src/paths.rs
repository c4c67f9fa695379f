// SPDX-License-Identifier: Apache-2.0

//! Fixed-length simple paths, λ-betweenness and walk counts on `K_n`.
//!
//! Path lengths are counted in edges everywhere in this module. A path
//! "passes through" every vertex on it, endpoints included, and both
//! orientations `(s, t)` and `(t, s)` of a path are counted.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Indexed, WeightedGraph};
use crate::metrics::Pmf;
use crate::model::NodeId;

/// Size limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLimits {
    pub max_vertices: usize,
    pub max_length: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_vertices: 20,
            max_length: 6,
        }
    }
}

impl ExactLimits {
    pub fn admits(&self, vertices: usize, length: usize) -> bool {
        vertices <= self.max_vertices && length <= self.max_length
    }

    fn check(&self, vertices: usize, length: usize) -> Result<()> {
        if self.admits(vertices, length) {
            Ok(())
        } else {
            Err(Error::InstanceTooLarge { vertices, length })
        }
    }
}

/// A simple path with a fixed number of edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathOfLength {
    vertices: Vec<NodeId>,
}

impl PathOfLength {
    /// Validates that `vertices` is a simple path of `graph` with at least one edge.
    pub fn new(vertices: Vec<NodeId>, graph: &WeightedGraph) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidParameter("a path needs at least one edge".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if vertices[..i].contains(v) {
                return Err(Error::InvalidParameter(format!("vertex {v} repeated in path")));
            }
        }
        if let Some(w) = vertices.windows(2).find(|w| !graph.has_edge(w[0], w[1])) {
            return Err(Error::InvalidParameter(format!("{}-{} is not an edge", w[0], w[1])));
        }
        Ok(PathOfLength { vertices })
    }

    pub fn vertices(&self) -> &[NodeId] {
        &self.vertices
    }

    pub fn length_in_edges(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn source(&self) -> NodeId {
        self.vertices[0]
    }

    pub fn target(&self) -> NodeId {
        self.vertices[self.vertices.len() - 1]
    }
}

fn endpoints(idx: &Indexed, source: NodeId, target: NodeId) -> Result<(usize, usize)> {
    if source == target {
        return Err(Error::InvalidParameter(format!(
            "source and target must differ (both {source})"
        )));
    }
    Ok((idx.index_of(source)?, idx.index_of(target)?))
}

fn require_length(length: usize) -> Result<()> {
    if length == 0 {
        Err(Error::InvalidParameter("path length must be at least one edge".into()))
    } else {
        Ok(())
    }
}

/// Randomized depth-first collection of up to `k` simple `source -> target`
/// paths of exactly `length` edges.
///
/// Adjacency lists are shuffled with `rng` at every expansion, so the set of
/// paths returned when more than `k` exist depends on the seed.
pub fn kpaths<R: Rng + ?Sized>(
    graph: &WeightedGraph,
    source: NodeId,
    target: NodeId,
    length: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<PathOfLength>> {
    require_length(length)?;
    let idx = graph.indexed();
    let (s, t) = endpoints(&idx, source, target)?;
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut search = KPathSearch {
        idx: &idx,
        target: t,
        length,
        k,
        on_path: vec![false; idx.ids.len()],
        cur: vec![s],
        found: &mut found,
    };
    search.on_path[s] = true;
    search.extend(rng);
    Ok(found
        .into_iter()
        .map(|p| PathOfLength {
            vertices: p.into_iter().map(|i| idx.ids[i]).collect(),
        })
        .collect())
}

struct KPathSearch<'a> {
    idx: &'a Indexed,
    target: usize,
    length: usize,
    k: usize,
    on_path: Vec<bool>,
    cur: Vec<usize>,
    found: &'a mut Vec<Vec<usize>>,
}

impl KPathSearch<'_> {
    fn extend<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.found.len() >= self.k {
            return;
        }
        let last = *self.cur.last().expect("path starts at source");
        let new_len = self.cur.len();
        if new_len == self.length {
            // Only the target can close the path at this depth.
            if !self.on_path[self.target] && self.idx.adjacent(last, self.target) {
                let mut sol = self.cur.clone();
                sol.push(self.target);
                self.found.push(sol);
            }
            return;
        }
        let mut adjacent: Vec<usize> = self.idx.adj[last]
            .iter()
            .copied()
            .filter(|&v| !self.on_path[v] && v != self.target)
            .collect();
        adjacent.shuffle(rng);
        for v in adjacent {
            if self.found.len() >= self.k {
                return;
            }
            self.cur.push(v);
            self.on_path[v] = true;
            self.extend(rng);
            self.on_path[v] = false;
            self.cur.pop();
        }
    }
}

/// Exact number of simple `source -> target` paths with `length` edges.
pub fn count_paths(graph: &WeightedGraph, source: NodeId, target: NodeId, length: usize) -> Result<u64> {
    count_paths_with_limits(graph, source, target, length, ExactLimits::default())
}

pub fn count_paths_with_limits(
    graph: &WeightedGraph,
    source: NodeId,
    target: NodeId,
    length: usize,
    limits: ExactLimits,
) -> Result<u64> {
    require_length(length)?;
    limits.check(graph.vertex_count(), length)?;
    let idx = graph.indexed();
    let (s, t) = endpoints(&idx, source, target)?;
    let mut on_path = vec![false; idx.ids.len()];

    fn walk(idx: &Indexed, v: usize, t: usize, left: usize, on_path: &mut [bool]) -> u64 {
        if left == 1 {
            return u64::from(idx.adjacent(v, t));
        }
        on_path[v] = true;
        let mut total = 0;
        for &w in &idx.adj[v] {
            if !on_path[w] && w != t {
                total += walk(idx, w, t, left - 1, on_path);
            }
        }
        on_path[v] = false;
        total
    }

    Ok(walk(&idx, s, t, length, &mut on_path))
}

/// Per-vertex λ-betweenness row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetweennessRow {
    pub node: NodeId,
    /// Paths (over all ordered pairs) that pass through the vertex.
    pub sigma: f64,
    /// `sigma / total_paths`.
    pub kp_b: f64,
    /// `sigma / Σ_w sigma(w)`.
    pub lb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetweennessTable {
    pub length: usize,
    pub rows: Vec<BetweennessRow>,
    /// Σ over ordered pairs of the number of length-λ paths.
    pub total_paths: f64,
    /// True when produced by [`lb_estimate`].
    pub estimated: bool,
}

impl BetweennessTable {
    fn from_counts(ids: &[NodeId], sigma: Vec<f64>, total_paths: f64, length: usize, estimated: bool) -> Result<Self> {
        let sigma_sum: f64 = sigma.iter().sum();
        if !(total_paths > 0.0 && sigma_sum > 0.0) {
            return Err(Error::LbUndefined(length));
        }
        let rows = ids
            .iter()
            .zip(sigma)
            .map(|(&node, s)| BetweennessRow {
                node,
                sigma: s,
                kp_b: s / total_paths,
                lb: s / sigma_sum,
            })
            .collect();
        Ok(BetweennessTable {
            length,
            rows,
            total_paths,
            estimated,
        })
    }

    pub fn lb(&self, node: NodeId) -> Option<f64> {
        self.rows.iter().find(|r| r.node == node).map(|r| r.lb)
    }

    /// The LB distribution as a node-selection pmf.
    pub fn to_pmf(&self) -> Result<Pmf> {
        Pmf::from_weights(self.rows.iter().map(|r| (r.node, r.sigma)))
    }

    /// CSV with header `node_id,sigma,kp_b,lb,estimated`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "sigma", "kp_b", "lb", "estimated"])?;
        for r in &self.rows {
            w.write_record([
                r.node.to_string(),
                r.sigma.to_string(),
                r.kp_b.to_string(),
                r.lb.to_string(),
                self.estimated.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Exact λ-betweenness table by exhaustive enumeration.
pub fn betweenness_table(graph: &WeightedGraph, length: usize) -> Result<BetweennessTable> {
    betweenness_table_with_limits(graph, length, ExactLimits::default())
}

pub fn betweenness_table_with_limits(
    graph: &WeightedGraph,
    length: usize,
    limits: ExactLimits,
) -> Result<BetweennessTable> {
    require_length(length)?;
    limits.check(graph.vertex_count(), length)?;
    let idx = graph.indexed();
    let n = idx.ids.len();
    let mut credit = vec![0u64; n];
    let mut on_path = vec![false; n];

    // Returns the number of complete paths below `v`; every vertex on the
    // current prefix is credited with the completions of its subtree.
    fn expand(idx: &Indexed, v: usize, left: usize, on_path: &mut [bool], credit: &mut [u64]) -> u64 {
        if left == 0 {
            credit[v] += 1;
            return 1;
        }
        on_path[v] = true;
        let mut total = 0;
        for &w in &idx.adj[v] {
            if !on_path[w] {
                total += expand(idx, w, left - 1, on_path, credit);
            }
        }
        on_path[v] = false;
        credit[v] += total;
        total
    }

    let total: u64 = (0..n).map(|s| expand(&idx, s, length, &mut on_path, &mut credit)).sum();
    let sigma = credit.into_iter().map(|c| c as f64).collect();
    BetweennessTable::from_counts(&idx.ids, sigma, total as f64, length, false)
}

/// Monte Carlo λ-betweenness for graphs beyond the exact limits.
///
/// Each sample grows a self-avoiding walk of `length` steps from a uniform
/// start vertex, choosing uniformly among unvisited neighbours, and weights
/// the completed path by the product of the branching factors it saw. The
/// weighted path counts estimate the exact sums without bias; the LB ratios
/// are consistent but not unbiased.
pub fn lb_estimate<R: Rng + ?Sized>(
    graph: &WeightedGraph,
    length: usize,
    samples: usize,
    rng: &mut R,
) -> Result<BetweennessTable> {
    require_length(length)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let idx = graph.indexed();
    let n = idx.ids.len();
    if n < 2 {
        return Err(Error::LbUndefined(length));
    }
    let mut acc = vec![0.0f64; n];
    let mut total = 0.0f64;
    let mut on_path = vec![false; n];
    let mut path = Vec::with_capacity(length + 1);
    let mut candidates = Vec::new();

    for _ in 0..samples {
        path.clear();
        let start = rng.random_range(0..n);
        path.push(start);
        on_path[start] = true;
        let mut weight = 1.0f64;
        for _ in 0..length {
            let last = *path.last().expect("non-empty");
            candidates.clear();
            candidates.extend(idx.adj[last].iter().copied().filter(|&w| !on_path[w]));
            if candidates.is_empty() {
                weight = 0.0;
                break;
            }
            weight *= candidates.len() as f64;
            let next = candidates[rng.random_range(0..candidates.len())];
            on_path[next] = true;
            path.push(next);
        }
        for &v in &path {
            on_path[v] = false;
        }
        if weight > 0.0 {
            total += weight;
            for &v in &path {
                acc[v] += weight;
            }
        }
    }

    let scale = n as f64 / samples as f64;
    let sigma = acc.into_iter().map(|a| a * scale).collect();
    BetweennessTable::from_counts(&idx.ids, sigma, total * scale, length, true)
}

fn pow_i128(base: i128, exp: u32) -> Result<i128> {
    base.checked_pow(exp).ok_or(Error::Overflow("power"))
}

fn sign(lambda: u32) -> i128 {
    if lambda.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn require_n(n: u64) -> Result<i128> {
    if n < 2 {
        return Err(Error::DegenerateNetwork(n as usize));
    }
    Ok(i128::from(n))
}

fn to_count(v: i128) -> Result<u128> {
    u128::try_from(v).map_err(|_| Error::Overflow("walk count"))
}

/// Walks of length λ between two fixed distinct vertices of `K_n`:
/// `((n-1)^λ - (-1)^λ) / n`.
pub fn walk_offdiag(n: u64, lambda: u32) -> Result<u128> {
    let n = require_n(n)?;
    let p = pow_i128(n - 1, lambda)?;
    to_count((p - sign(lambda)) / n)
}

/// Closed walks of length λ at a fixed vertex of `K_n`:
/// `((n-1)^λ + (n-1)(-1)^λ) / n`.
pub fn walk_diag(n: u64, lambda: u32) -> Result<u128> {
    let n = require_n(n)?;
    let p = pow_i128(n - 1, lambda)?;
    let tail = (n - 1).checked_mul(sign(lambda)).ok_or(Error::Overflow("walk_diag"))?;
    to_count(p.checked_add(tail).ok_or(Error::Overflow("walk_diag"))? / n)
}

/// Walks of length λ summed over all ordered pairs of distinct vertices of
/// `K_n`: `(n-1)((n-1)^λ - (-1)^λ)`.
pub fn total_walks(n: u64, lambda: u32) -> Result<u128> {
    let n = require_n(n)?;
    let p = pow_i128(n - 1, lambda)?;
    let v = (n - 1)
        .checked_mul(p - sign(lambda))
        .ok_or(Error::Overflow("total_walks"))?;
    to_count(v)
}

/// `(t^λ, d^λ)` by the first-order recurrences from `t^1 = 1`, `d^1 = 0`.
pub fn walk_counts_by_recurrence(n: u64, lambda: u32) -> Result<(u128, u128)> {
    require_n(n)?;
    if lambda == 0 {
        return Ok((0, 1));
    }
    let n = u128::from(n);
    let (mut t, mut d) = (1u128, 0u128);
    for _ in 1..lambda {
        let next_t = (n - 2)
            .checked_mul(t)
            .and_then(|x| x.checked_add(d))
            .ok_or(Error::Overflow("walk recurrence"))?;
        let next_d = (n - 1).checked_mul(t).ok_or(Error::Overflow("walk recurrence"))?;
        t = next_t;
        d = next_d;
    }
    Ok((t, d))
}
