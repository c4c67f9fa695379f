// SPDX-License-Identifier: Apache-2.0

//! Circuit selection strategies: random, geographical, bandwidth-weighted
//! and latency-graph.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::latency::LatencyGraph;
use crate::metrics::{grp_pmf, LbEstimator, Pmf};
use crate::model::{Circuit, Node, NodeId, Provenance, StrategyKind};
use crate::paths::kpaths;

/// Rejections tolerated by the bandwidth sampler before it switches to the
/// residual distribution (same law, bounded time).
const MAX_BW_REJECTIONS: usize = 10_000;

fn check_delta(delta: usize) -> Result<()> {
    if delta < 2 {
        return Err(Error::InvalidParameter(format!("circuit length {delta} < 2")));
    }
    Ok(())
}

fn check_client(nodes: &[Node], client: NodeId) -> Result<()> {
    if nodes.iter().any(|n| n.id == client) {
        return Err(Error::ClientAmongRelays(client));
    }
    Ok(())
}

/// Draws `delta` distinct ids uniformly without replacement, in draw order.
fn draw_uniform<R: Rng + ?Sized>(mut pool: Vec<NodeId>, delta: usize, rng: &mut R) -> Vec<NodeId> {
    (0..delta)
        .map(|_| {
            let j = rng.random_range(0..pool.len());
            pool.remove(j)
        })
        .collect()
}

/// Uniform selection without replacement.
pub fn select_random<R: Rng + ?Sized>(nodes: &[Node], client: NodeId, delta: usize, rng: &mut R) -> Result<Circuit> {
    check_delta(delta)?;
    check_client(nodes, client)?;
    if nodes.len() < delta {
        return Err(Error::InsufficientNodes {
            needed: delta,
            available: nodes.len(),
        });
    }
    let relays = draw_uniform(nodes.iter().map(|n| n.id).collect(), delta, rng);
    Circuit::new(client, relays, Provenance::Direct)
}

/// Uniform selection restricted to nodes located in `home_country`.
pub fn select_geo<R: Rng + ?Sized>(
    nodes: &[Node],
    client: NodeId,
    delta: usize,
    home_country: &str,
    rng: &mut R,
) -> Result<Circuit> {
    check_delta(delta)?;
    check_client(nodes, client)?;
    let pool: Vec<NodeId> = nodes
        .iter()
        .filter(|n| n.country == home_country)
        .map(|n| n.id)
        .collect();
    if pool.len() < delta {
        return Err(Error::CountryTooSmall {
            country: home_country.to_string(),
            needed: delta,
            available: pool.len(),
        });
    }
    let relays = draw_uniform(pool, delta, rng);
    Circuit::new(client, relays, Provenance::Direct)
}

/// Cumulative bandwidth distribution over nodes sorted by ascending
/// bandwidth (ties by id).
#[derive(Debug, Clone)]
pub struct BandwidthTable {
    order: Vec<NodeId>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BandwidthTable {
    pub fn new(nodes: &[Node]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InsufficientNodes {
                needed: 1,
                available: 0,
            });
        }
        if let Some(n) = nodes.iter().find(|n| !(n.bandwidth.is_finite() && n.bandwidth > 0.0)) {
            return Err(Error::InvalidBandwidth(n.bandwidth));
        }
        let mut sorted: Vec<&Node> = nodes.iter().collect();
        sorted.sort_by(|a, b| a.bandwidth.total_cmp(&b.bandwidth).then(a.id.cmp(&b.id)));
        let total: f64 = sorted.iter().map(|n| n.bandwidth).sum();
        let mut running = 0.0;
        let mut cumulative: Vec<f64> = sorted
            .iter()
            .map(|n| {
                running += n.bandwidth / total;
                running
            })
            .collect();
        *cumulative.last_mut().expect("non-empty") = 1.0;
        Ok(BandwidthTable {
            order: sorted.iter().map(|n| n.id).collect(),
            weights: sorted.iter().map(|n| n.bandwidth / total).collect(),
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Node whose cumulative interval `[W_{j-1}, W_j)` contains `u`.
    fn locate(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.order.len() - 1)
    }

    /// Draws `delta` distinct nodes; a hit on an already chosen node
    /// redraws the uniform variate.
    pub fn draw<R: Rng + ?Sized>(&self, delta: usize, rng: &mut R) -> Vec<NodeId> {
        let mut chosen = vec![false; self.order.len()];
        let mut out = Vec::with_capacity(delta);
        for _ in 0..delta {
            let mut pick = None;
            for _ in 0..MAX_BW_REJECTIONS {
                let j = self.locate(rng.random::<f64>());
                if !chosen[j] {
                    pick = Some(j);
                    break;
                }
            }
            let j = pick.unwrap_or_else(|| self.draw_residual(&chosen, rng));
            chosen[j] = true;
            out.push(self.order[j]);
        }
        out
    }

    fn draw_residual<R: Rng + ?Sized>(&self, chosen: &[bool], rng: &mut R) -> usize {
        let free: f64 = self
            .weights
            .iter()
            .zip(chosen)
            .filter(|(_, c)| !**c)
            .map(|(w, _)| w)
            .sum();
        let mut u = rng.random::<f64>() * free;
        let mut last = 0;
        for (j, w) in self.weights.iter().enumerate().filter(|(j, _)| !chosen[*j]) {
            last = j;
            if u < *w {
                return j;
            }
            u -= w;
        }
        last
    }
}

/// Bandwidth-proportional selection by inverse CDF with rejection of repeats.
pub fn select_bw<R: Rng + ?Sized>(nodes: &[Node], client: NodeId, delta: usize, rng: &mut R) -> Result<Circuit> {
    check_delta(delta)?;
    check_client(nodes, client)?;
    if nodes.len() < delta {
        return Err(Error::InsufficientNodes {
            needed: delta,
            available: nodes.len(),
        });
    }
    let table = BandwidthTable::new(nodes)?;
    Circuit::new(client, table.draw(delta, rng), Provenance::Direct)
}

/// Parameters of the latency-graph strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrpParams {
    /// Paths collected per exit before picking the lightest.
    pub k: usize,
    pub max_iter: usize,
}

impl Default for GrpParams {
    fn default() -> Self {
        GrpParams { k: 300, max_iter: 5 }
    }
}

/// Latency-graph selection over the full latency graph (client included).
pub fn select_grp<R: Rng + ?Sized>(
    graph: &LatencyGraph,
    delta: usize,
    params: GrpParams,
    rng: &mut R,
) -> Result<Circuit> {
    select_grp_on(&graph.connectivity_graph(), graph.client(), delta, params, rng)
}

/// As [`select_grp`], on a prebuilt connectivity graph that contains `client`.
pub fn select_grp_on<R: Rng + ?Sized>(
    graph: &WeightedGraph,
    client: NodeId,
    delta: usize,
    params: GrpParams,
    rng: &mut R,
) -> Result<Circuit> {
    check_delta(delta)?;
    if params.k == 0 || params.max_iter == 0 {
        return Err(Error::InvalidParameter("k and max_iter must be >= 1".into()));
    }
    if !graph.contains(client) {
        return Err(Error::ClientNotInVertices(client));
    }
    if graph.vertex_count() < delta + 1 {
        return Err(Error::TooFewVertices {
            needed: delta + 1,
            got: graph.vertex_count(),
        });
    }
    let candidates: Vec<NodeId> = graph.vertices().filter(|&v| v != client).collect();
    for _ in 0..params.max_iter {
        let exit = candidates[rng.random_range(0..candidates.len())];
        let paths = kpaths(graph, client, exit, delta, params.k, rng)?;
        let mut best: Option<(f64, &[NodeId])> = None;
        for p in &paths {
            let w = graph.path_weight(p.vertices()).expect("kpaths returns graph paths");
            if best.is_none_or(|(bw, _)| w < bw) {
                best = Some((w, p.vertices()));
            }
        }
        if let Some((_, vertices)) = best {
            return Circuit::new(client, vertices[1..].to_vec(), Provenance::GraphPath);
        }
    }
    let relays = draw_uniform(candidates, delta, rng);
    Circuit::new(client, relays, Provenance::RandomFallback)
}

/// What the analytical pmf of a strategy is computed from.
#[derive(Debug, Clone, Copy)]
pub struct PmfContext<'a> {
    pub nodes: &'a [Node],
    pub home_country: Option<&'a str>,
    pub analytical_graph: Option<&'a WeightedGraph>,
    /// Path length in edges on the analytical graph (δ - 1).
    pub lambda: usize,
    pub estimator: LbEstimator,
}

/// Analytical single-node selection pmf of a strategy.
pub fn strategy_pmf(kind: StrategyKind, ctx: &PmfContext<'_>) -> Result<Pmf> {
    let ids = ctx.nodes.iter().map(|n| n.id);
    match kind {
        StrategyKind::Rnd => Pmf::uniform(ids),
        StrategyKind::Geo => {
            let country = ctx
                .home_country
                .ok_or_else(|| Error::InvalidParameter("geo pmf needs a home country".into()))?;
            let m = ctx.nodes.iter().filter(|n| n.country == country).count();
            if m == 0 {
                return Err(Error::EmptyCountry);
            }
            Pmf::from_weights(
                ctx.nodes
                    .iter()
                    .map(|n| (n.id, if n.country == country { 1.0 } else { 0.0 })),
            )
        }
        StrategyKind::Bw => {
            if let Some(n) = ctx
                .nodes
                .iter()
                .find(|n| !n.bandwidth.is_finite() || n.bandwidth <= 0.0)
            {
                return Err(Error::InvalidBandwidth(n.bandwidth));
            }
            Pmf::from_weights(ctx.nodes.iter().map(|n| (n.id, n.bandwidth)))
        }
        StrategyKind::Grp => {
            let graph = ctx
                .analytical_graph
                .ok_or_else(|| Error::InvalidParameter("grp pmf needs an analytical graph".into()))?;
            Ok(grp_pmf(graph, ctx.lambda, &ctx.estimator)?.0)
        }
    }
}

/// Common interface over the four strategies.
pub trait SelectionStrategy {
    fn kind(&self) -> StrategyKind;
    fn select(&self, rng: &mut dyn RngCore) -> Result<Circuit>;
}

pub struct RandomStrategy<'a> {
    pub nodes: &'a [Node],
    pub client: NodeId,
    pub delta: usize,
}

impl SelectionStrategy for RandomStrategy<'_> {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Rnd
    }

    fn select(&self, rng: &mut dyn RngCore) -> Result<Circuit> {
        select_random(self.nodes, self.client, self.delta, rng)
    }
}

pub struct GeoStrategy<'a> {
    pub nodes: &'a [Node],
    pub client: NodeId,
    pub delta: usize,
    pub home_country: &'a str,
}

impl SelectionStrategy for GeoStrategy<'_> {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Geo
    }

    fn select(&self, rng: &mut dyn RngCore) -> Result<Circuit> {
        select_geo(self.nodes, self.client, self.delta, self.home_country, rng)
    }
}

pub struct BandwidthStrategy {
    table: BandwidthTable,
    client: NodeId,
    delta: usize,
}

impl BandwidthStrategy {
    pub fn new(nodes: &[Node], client: NodeId, delta: usize) -> Result<Self> {
        check_delta(delta)?;
        check_client(nodes, client)?;
        let table = BandwidthTable::new(nodes)?;
        if table.len() < delta {
            return Err(Error::InsufficientNodes {
                needed: delta,
                available: table.len(),
            });
        }
        Ok(BandwidthStrategy { table, client, delta })
    }
}

impl SelectionStrategy for BandwidthStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Bw
    }

    fn select(&self, rng: &mut dyn RngCore) -> Result<Circuit> {
        Circuit::new(self.client, self.table.draw(self.delta, rng), Provenance::Direct)
    }
}

/// Latency-graph strategy over a fixed snapshot of the latency graph.
pub struct GraphStrategy {
    connectivity: WeightedGraph,
    client: NodeId,
    delta: usize,
    params: GrpParams,
}

impl GraphStrategy {
    pub fn new(snapshot: &LatencyGraph, delta: usize, params: GrpParams) -> Self {
        GraphStrategy {
            connectivity: snapshot.connectivity_graph(),
            client: snapshot.client(),
            delta,
            params,
        }
    }
}

impl SelectionStrategy for GraphStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Grp
    }

    fn select(&self, rng: &mut dyn RngCore) -> Result<Circuit> {
        select_grp_on(&self.connectivity, self.client, self.delta, self.params, rng)
    }
}
