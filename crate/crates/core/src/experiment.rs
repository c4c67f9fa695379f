// SPDX-License-Identifier: Apache-2.0

//! Experiment grid: builds the simulated testbed, warms up the latency
//! graph, measures transfer times per (strategy, page size, circuit length)
//! cell and reports anonymity degrees.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::latency::{LatencyGraph, Timestamp};
use crate::metrics::{anonymity_degree, degree_bw, degree_geo, degree_grp, LbEstimator, Pmf};
use crate::model::{Circuit, Node, NodeId, Provenance, StrategyKind};
use crate::paths::ExactLimits;
use crate::rng::{derive_seed, derived};
use crate::simnet::{generate_population, SimNetwork};
use crate::strategy::{select_bw, select_geo, select_grp_on, select_random, GrpParams};

const POPULATION_STREAM: u64 = 1;
const NETWORK_STREAM: u64 = 2;
const WARMUP_STREAM: u64 = 3;
const CELL_STREAM: u64 = 4;

/// Parameters of the latency-graph strategy and its measurement loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpPlan {
    /// Ticks between measurement rounds.
    pub delta_t: u64,
    pub probes_per_round: usize,
    pub k: usize,
    pub max_iter: usize,
    /// Walks used when LB has to be estimated.
    pub lb_samples: usize,
}

impl Default for GrpPlan {
    fn default() -> Self {
        GrpPlan {
            delta_t: 5,
            probes_per_round: 3,
            k: 300,
            max_iter: 5,
            lb_samples: 20_000,
        }
    }
}

impl GrpPlan {
    pub fn params(&self) -> GrpParams {
        GrpParams {
            k: self.k,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub strategies: Vec<StrategyKind>,
    pub page_sizes_kb: Vec<u32>,
    pub circuit_lengths: Vec<usize>,
    pub repetitions: usize,
    /// Measurement rounds run before any circuit is built.
    pub warmup_rounds: usize,
    pub seed: u64,
    pub home_country: String,
    pub grp: GrpPlan,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            strategies: StrategyKind::ALL.to_vec(),
            page_sizes_kb: vec![50, 150, 320],
            circuit_lengths: vec![3, 4, 5, 6],
            repetitions: 100,
            warmup_rounds: 2400,
            seed: 1,
            home_country: "US".into(),
            grp: GrpPlan::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("experiment: {m}")));
        if self.strategies.is_empty() {
            return fail("no strategies");
        }
        if self.repetitions == 0 {
            return fail("repetitions must be >= 1");
        }
        if self.circuit_lengths.iter().any(|&d| d < 2) {
            return fail("circuit lengths must be >= 2");
        }
        if self.page_sizes_kb.contains(&0) {
            return fail("page sizes must be > 0");
        }
        let g = &self.grp;
        if g.delta_t == 0 || g.probes_per_round == 0 || g.k == 0 || g.max_iter == 0 || g.lb_samples == 0 {
            return fail("grp parameters must be >= 1");
        }
        Ok(())
    }

    pub fn estimator(&self) -> LbEstimator {
        LbEstimator {
            limits: ExactLimits::default(),
            samples: self.grp.lb_samples,
            seed: derive_seed(self.seed, &[WARMUP_STREAM, 0x1b]),
        }
    }
}

/// Population, simulated network and the warmed-up latency graph.
#[derive(Debug, Clone)]
pub struct Testbed {
    pub nodes: Vec<Node>,
    pub client: NodeId,
    pub network: SimNetwork,
    pub graph: LatencyGraph,
}

impl Testbed {
    /// Builds the population and runs `config.experiment.warmup_rounds`
    /// measurement rounds, all derived from the plan seed.
    pub fn build(config: &Config) -> Result<Self> {
        let plan = &config.experiment;
        let spec = config.population_spec()?;
        let nodes = generate_population(&spec, &mut derived(plan.seed, &[POPULATION_STREAM]))?;
        let client = NodeId(u32::try_from(nodes.len()).map_err(|_| Error::Overflow("population size"))?);
        let network = SimNetwork::for_population(
            config.latency,
            &nodes,
            client,
            &plan.home_country,
            derive_seed(plan.seed, &[NETWORK_STREAM]),
        )?;
        let mut graph = LatencyGraph::new(
            nodes.iter().map(|n| n.id).chain(std::iter::once(client)),
            client,
            Timestamp(0),
        )?;
        let mut rng = derived(plan.seed, &[WARMUP_STREAM]);
        for round in 1..=plan.warmup_rounds as u64 {
            let tq = Timestamp(round * plan.grp.delta_t);
            graph.measurement_round(&network, plan.grp.probes_per_round, tq, &mut rng)?;
        }
        Ok(Testbed {
            nodes,
            client,
            network,
            graph,
        })
    }
}

/// Anonymity degree of one strategy (and circuit length, for grp).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeEntry {
    pub strategy: StrategyKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<usize>,
    pub degree: Option<f64>,
    pub estimated: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl DegreeEntry {
    fn from_result(strategy: StrategyKind, delta: Option<usize>, r: Result<(f64, bool)>) -> Self {
        match r {
            Ok((degree, estimated)) => DegreeEntry {
                strategy,
                delta,
                degree: Some(degree),
                estimated,
                error: None,
            },
            Err(e) => DegreeEntry {
                strategy,
                delta,
                degree: None,
                estimated: false,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Degrees of every planned strategy, grp once per circuit length on the
/// analytical graph with paths of `δ - 1` edges.
pub fn degree_report(plan: &ExperimentPlan, nodes: &[Node], graph: &LatencyGraph) -> Vec<DegreeEntry> {
    let n = nodes.len();
    let analytical = graph.analytical_graph();
    let estimator = plan.estimator();
    let mut out = Vec::new();
    for &kind in &plan.strategies {
        match kind {
            StrategyKind::Rnd => {
                let r = Pmf::uniform(nodes.iter().map(|n| n.id))
                    .and_then(|p| anonymity_degree(&p, n))
                    .map(|d| (d.value, false));
                out.push(DegreeEntry::from_result(kind, None, r));
            }
            StrategyKind::Geo => {
                let m = nodes.iter().filter(|x| x.country == plan.home_country).count();
                out.push(DegreeEntry::from_result(
                    kind,
                    None,
                    degree_geo(m, n).map(|d| (d, false)),
                ));
            }
            StrategyKind::Bw => {
                let bws: Vec<f64> = nodes.iter().map(|x| x.bandwidth).collect();
                out.push(DegreeEntry::from_result(
                    kind,
                    None,
                    degree_bw(&bws).map(|d| (d, false)),
                ));
            }
            StrategyKind::Grp => {
                for &delta in &plan.circuit_lengths {
                    let r = degree_grp(&analytical, delta - 1, &estimator).map(|d| (d.value, d.estimated));
                    out.push(DegreeEntry::from_result(kind, Some(delta), r));
                }
            }
        }
    }
    out
}

fn lookup_degree(degrees: &[DegreeEntry], strategy: StrategyKind, delta: usize) -> Option<f64> {
    degrees
        .iter()
        .find(|e| e.strategy == strategy && e.delta.is_none_or(|d| d == delta))
        .and_then(|e| e.degree)
}

/// Aggregated transfer times of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub strategy: StrategyKind,
    pub page_kb: u32,
    pub delta: usize,
    pub min_s: f64,
    pub max_s: f64,
    pub avg_s: f64,
    /// Population standard deviation of `samples`.
    pub std_s: f64,
    pub degree: Option<f64>,
    /// Share of grp circuits that fell back to random selection.
    pub fallback_rate: Option<f64>,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub strategy: StrategyKind,
    pub page_kb: u32,
    pub delta: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub seed: u64,
    /// Edge density of the analytical graph after warm-up.
    pub graph_density: f64,
    pub degrees: Vec<DegreeEntry>,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentResult {
    pub fn cell(&self, strategy: StrategyKind, page_kb: u32, delta: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.page_kb == page_kb && c.delta == delta)
    }
}

/// Mean and population standard deviation.
pub fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct CellContext<'a> {
    config: &'a Config,
    testbed: &'a Testbed,
    connectivity: WeightedGraph,
    bandwidth: BTreeMap<NodeId, f64>,
}

impl CellContext<'_> {
    fn select<R: Rng + ?Sized>(&self, kind: StrategyKind, delta: usize, rng: &mut R) -> Result<Circuit> {
        let tb = self.testbed;
        let plan = &self.config.experiment;
        match kind {
            StrategyKind::Rnd => select_random(&tb.nodes, tb.client, delta, rng),
            StrategyKind::Geo => select_geo(&tb.nodes, tb.client, delta, &plan.home_country, rng),
            StrategyKind::Bw => select_bw(&tb.nodes, tb.client, delta, rng),
            StrategyKind::Grp => select_grp_on(&self.connectivity, tb.client, delta, plan.grp.params(), rng),
        }
    }

    fn measure<R: Rng + ?Sized>(&self, circuit: &Circuit, page_kb: u32, rng: &mut R) -> Result<f64> {
        let latencies = circuit
            .links()
            .iter()
            .map(|&(a, b)| self.testbed.network.link_latency(a, b, rng))
            .collect::<Result<Vec<_>>>()?;
        let bandwidths = circuit
            .relays()
            .iter()
            .map(|id| self.bandwidth.get(id).copied().ok_or(Error::UnknownVertex(*id)))
            .collect::<Result<Vec<_>>>()?;
        let model = self.config.transfer.with_page(f64::from(page_kb));
        crate::simnet::transfer_time(&model, circuit, &latencies, &bandwidths)
    }

    fn run(&self, kind: StrategyKind, page_kb: u32, delta: usize, degrees: &[DegreeEntry]) -> Result<CellResult> {
        let plan = &self.config.experiment;
        let cell_seed = derive_seed(plan.seed, &[CELL_STREAM, kind as u64, u64::from(page_kb), delta as u64]);
        let mut samples = Vec::with_capacity(plan.repetitions);
        let mut fallbacks = 0usize;
        for rep in 0..plan.repetitions {
            let mut rng = derived(cell_seed, &[rep as u64]);
            let circuit = self.select(kind, delta, &mut rng)?;
            if circuit.provenance() == Provenance::RandomFallback {
                fallbacks += 1;
            }
            samples.push(self.measure(&circuit, page_kb, &mut rng)?);
        }
        let (avg_s, std_s) = mean_and_std(&samples);
        Ok(CellResult {
            strategy: kind,
            page_kb,
            delta,
            min_s: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max_s: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg_s,
            std_s,
            degree: lookup_degree(degrees, kind, delta),
            fallback_rate: (kind == StrategyKind::Grp).then(|| fallbacks as f64 / plan.repetitions as f64),
            samples,
        })
    }
}

/// Runs the whole grid. Cells run in parallel on independent seed streams;
/// a failing cell is recorded in `failures` and does not stop the others.
pub fn run_experiment(config: &Config) -> Result<ExperimentResult> {
    config.validate()?;
    let testbed = Testbed::build(config)?;
    run_on_testbed(config, &testbed)
}

/// As [`run_experiment`] on an already built testbed. The latency graph is
/// frozen for the duration of the run, as are the degrees.
pub fn run_on_testbed(config: &Config, testbed: &Testbed) -> Result<ExperimentResult> {
    let plan = &config.experiment;
    plan.validate()?;
    let degrees = degree_report(plan, &testbed.nodes, &testbed.graph);
    let ctx = CellContext {
        config,
        testbed,
        connectivity: testbed.graph.connectivity_graph(),
        bandwidth: testbed.nodes.iter().map(|n| (n.id, n.bandwidth)).collect(),
    };
    let mut grid = Vec::new();
    for &kind in &plan.strategies {
        for &page in &plan.page_sizes_kb {
            for &delta in &plan.circuit_lengths {
                grid.push((kind, page, delta));
            }
        }
    }
    let outcomes: Vec<_> = grid
        .par_iter()
        .map(|&(kind, page, delta)| (kind, page, delta, ctx.run(kind, page, delta, &degrees)))
        .collect();
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (strategy, page_kb, delta, outcome) in outcomes {
        match outcome {
            Ok(cell) => cells.push(cell),
            Err(e) => failures.push(CellFailure {
                strategy,
                page_kb,
                delta,
                error: e.to_string(),
            }),
        }
    }
    Ok(ExperimentResult {
        seed: plan.seed,
        graph_density: testbed.graph.analytical_graph().density(),
        degrees,
        cells,
        failures,
    })
}

/// One point of the density curve; `mean` is `None` when no trial had a
/// defined LB distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub density: f64,
    pub edges: usize,
    pub trials: usize,
    pub defined_trials: usize,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap: Option<String>,
}

/// Average exact grp degree over random graphs with `n` vertices and
/// `round(density · n(n-1)/2)` edges, for each density.
pub fn density_sweep<R: Rng + ?Sized>(
    n: u32,
    lambda: usize,
    densities: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<SweepPoint>> {
    let limits = ExactLimits::default();
    if !limits.admits(n as usize, lambda) {
        return Err(Error::InstanceTooLarge {
            vertices: n as usize,
            length: lambda,
        });
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let estimator = LbEstimator::default();
    let pairs = n as usize * (n as usize).saturating_sub(1) / 2;
    let mut out = Vec::with_capacity(densities.len());
    for &density in densities {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidParameter(format!("density {density} outside [0, 1]")));
        }
        let edges = (density * pairs as f64).round() as usize;
        let mut values = Vec::with_capacity(trials);
        let mut last_error = None;
        for _ in 0..trials {
            let g = WeightedGraph::random_with_edges(n, edges, rng);
            match degree_grp(&g, lambda, &estimator) {
                Ok(d) => values.push(d.value),
                Err(e) => last_error = Some(e.to_string()),
            }
        }
        let (mean, std_error) = match values.len() {
            0 => (None, None),
            1 => (Some(values[0]), None),
            k => {
                let m = values.iter().sum::<f64>() / k as f64;
                let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64;
                (Some(m), Some((var / k as f64).sqrt()))
            }
        };
        out.push(SweepPoint {
            density,
            edges,
            trials,
            defined_trials: values.len(),
            mean,
            std_error,
            gap: if values.is_empty() { last_error } else { None },
        });
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 9] = [
    "strategy",
    "page_kb",
    "delta",
    "min_s",
    "max_s",
    "avg_s",
    "std_s",
    "degree",
    "fallback_rate",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Summary table, one row per cell.
pub fn write_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in &result.cells {
        w.write_record([
            c.strategy.as_str().to_string(),
            c.page_kb.to_string(),
            c.delta.to_string(),
            c.min_s.to_string(),
            c.max_s.to_string(),
            c.avg_s.to_string(),
            c.std_s.to_string(),
            opt(c.degree),
            opt(c.fallback_rate),
        ])?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}

/// Plot-ready long format: one row per measured transfer.
pub fn write_samples_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "page_kb", "delta", "repetition", "seconds"])?;
    for c in &result.cells {
        for (i, s) in c.samples.iter().enumerate() {
            w.write_record([
                c.strategy.as_str().to_string(),
                c.page_kb.to_string(),
                c.delta.to_string(),
                i.to_string(),
                s.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}

pub fn to_json(result: &ExperimentResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)?)
}

pub fn from_json(text: &str) -> Result<ExperimentResult> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Writes results into `dir`: `results.csv` and `samples.csv` for CSV,
/// `results.json` for JSON. Returns the files written.
pub fn emit_results(result: &ExperimentResult, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let path = dir.join(name);
        std::fs::File::create(&path)
            .map(|f| (path.clone(), std::io::BufWriter::new(f)))
            .map_err(|e| Error::io(&path, e))
    };
    match format {
        OutputFormat::Csv => {
            let (summary, f) = create("results.csv")?;
            write_csv(result, f)?;
            let (long, f) = create("samples.csv")?;
            write_samples_csv(result, f)?;
            Ok(vec![summary, long])
        }
        OutputFormat::Json => {
            let (path, mut f) = create("results.json")?;
            f.write_all(to_json(result)?.as_bytes())
                .and_then(|_| f.write_all(b"\n"))
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(&path, e))?;
            Ok(vec![path])
        }
    }
}
