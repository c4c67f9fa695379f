// SPDX-License-Identifier: Apache-2.0

//! Reference implementations used as test oracles. They favour obviousness
//! over speed and share no code with the library algorithms.

#![allow(dead_code)]

use std::collections::BTreeMap;

use onionsel::{NodeId, WeightedGraph};
use rand::Rng;

/// Every ordered sequence of `length + 1` distinct vertices whose
/// consecutive members are adjacent, found by scanning all tuples.
pub fn brute_force_paths(graph: &WeightedGraph, length: usize) -> Vec<Vec<NodeId>> {
    let ids: Vec<NodeId> = graph.vertices().collect();
    let n = ids.len();
    let slots = length + 1;
    let mut out = Vec::new();
    if n < slots {
        return out;
    }
    let mut digits = vec![0usize; slots];
    loop {
        let tuple: Vec<NodeId> = digits.iter().map(|&d| ids[d]).collect();
        let mut distinct = tuple.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() == slots && tuple.windows(2).all(|w| graph.has_edge(w[0], w[1])) {
            out.push(tuple);
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == slots {
                return out;
            }
            digits[i] += 1;
            if digits[i] < n {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Per-vertex count of enumerated paths containing it, plus the path total.
pub fn brute_force_betweenness(graph: &WeightedGraph, length: usize) -> (BTreeMap<NodeId, u64>, u64) {
    let paths = brute_force_paths(graph, length);
    let mut sigma: BTreeMap<NodeId, u64> = graph.vertices().map(|v| (v, 0)).collect();
    for p in &paths {
        for v in p {
            *sigma.get_mut(v).expect("path vertex in graph") += 1;
        }
    }
    (sigma, paths.len() as u64)
}

/// `A^power` for the adjacency matrix of `K_n`, by repeated multiplication.
pub fn complete_graph_matrix_power(n: usize, power: u32) -> Vec<Vec<u128>> {
    let a: Vec<Vec<u128>> = (0..n).map(|i| (0..n).map(|j| u128::from(i != j)).collect()).collect();
    let mut acc: Vec<Vec<u128>> = (0..n).map(|i| (0..n).map(|j| u128::from(i == j)).collect()).collect();
    for _ in 0..power {
        let mut next = vec![vec![0u128; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|k| acc[i][k] * a[k][j]).sum();
            }
        }
        acc = next;
    }
    acc
}

/// Erdős–Rényi graph: each pair joined independently with probability `p`.
pub fn bernoulli_graph<R: Rng>(n: u32, p: f64, rng: &mut R) -> WeightedGraph {
    let mut g = WeightedGraph::new((0..n).map(NodeId));
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                g.add_edge(NodeId(a), NodeId(b), 1.0 + rng.random::<f64>())
                    .expect("distinct endpoints");
            }
        }
    }
    g
}

/// Total variation distance between empirical counts and a pmf.
pub fn total_variation(counts: &BTreeMap<NodeId, u64>, draws: u64, pmf: &onionsel::Pmf) -> f64 {
    let mut tv = 0.0;
    for (id, p) in pmf.iter() {
        let c = counts.get(&id).copied().unwrap_or(0);
        tv += (c as f64 / draws as f64 - p).abs();
    }
    for (id, c) in counts {
        if pmf.get(*id) == 0.0 {
            tv += *c as f64 / draws as f64;
        }
    }
    tv / 2.0
}
