// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any failed.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use onionsel::config::Config;
use onionsel::experiment::{density_sweep, run_experiment};
use onionsel::latency::alpha;
use onionsel::metrics::{adversary_success, degree_bw, degree_geo, degree_grp, AdversaryModel, LbEstimator};
use onionsel::paths::{betweenness_table, total_walks, walk_counts_by_recurrence, walk_diag, walk_offdiag};
use onionsel::rng::seeded;
use onionsel::simnet::generate_population;
use onionsel::strategy::{select_bw, select_geo, select_grp, select_random, strategy_pmf, GrpParams, PmfContext};
use onionsel::{
    anonymity_degree, Latency, LatencyGraph, NodeId, Pmf, Provenance, StrategyKind, Timestamp, WeightedGraph,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn closed_form_degrees() -> Outcome {
    let start = Instant::now();
    let uniform = Pmf::uniform((0..100).map(NodeId)).map_err(|e| e.to_string())?;
    let d_rnd = anonymity_degree(&uniform, 100).map_err(|e| e.to_string())?.value;
    ensure(d_rnd == 1.0, || format!("d_rnd = {d_rnd}"))?;
    let d_geo = degree_geo(27, 100).map_err(|e| e.to_string())?;
    let oracle = 27f64.ln() / 100f64.ln();
    ensure((d_geo - oracle).abs() < 1e-15, || {
        format!("d_geo = {d_geo}, oracle {oracle}")
    })?;
    ensure((d_geo - 0.7157).abs() < 5e-5, || format!("d_geo = {d_geo} vs 0.7157"))?;
    let d_bw = degree_bw(&[512.0; 100]).map_err(|e| e.to_string())?;
    ensure(d_bw == 1.0, || format!("uniform d_bw = {d_bw}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("d_rnd=1, d_geo(27,100)={d_geo:.6}, uniform d_bw=1"))
}

fn walk_calculus() -> Outcome {
    let start = Instant::now();
    for n in 2..=8usize {
        for lambda in 1..=6u32 {
            let m = common::complete_graph_matrix_power(n, lambda);
            let off = walk_offdiag(n as u64, lambda).map_err(|e| e.to_string())?;
            let diag = walk_diag(n as u64, lambda).map_err(|e| e.to_string())?;
            let total = total_walks(n as u64, lambda).map_err(|e| e.to_string())?;
            let oracle_total: u128 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[i][j])
                .sum();
            for (i, row) in m.iter().enumerate() {
                for (j, &got) in row.iter().enumerate() {
                    let expected = if i == j { diag } else { off };
                    ensure(got == expected, || {
                        format!("n={n} λ={lambda} entry ({i},{j}) = {got} vs {expected}")
                    })?;
                }
            }
            ensure(total == oracle_total, || {
                format!("n={n} λ={lambda} total {total} vs {oracle_total}")
            })?;
        }
    }
    let k4 = total_walks(4, 2).map_err(|e| e.to_string())?;
    ensure(k4 == 24, || format!("total_walks(4,2) = {k4}"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok("closed forms equal A^λ entries for n in 2..=8, λ in 1..=6; total_walks(4,2)=24".into())
}

fn recurrence_fidelity() -> Outcome {
    for n in 2..=8u64 {
        for lambda in 1..=6u32 {
            let t = walk_offdiag(n, lambda).map_err(|e| e.to_string())? as i128;
            let d = walk_diag(n, lambda).map_err(|e| e.to_string())? as i128;
            let sign: i128 = if lambda % 2 == 0 { 1 } else { -1 };
            let (rt, rd) = walk_counts_by_recurrence(n, lambda).map_err(|e| e.to_string())?;
            ensure((rt as i128, rd as i128) == (t, d), || {
                format!("recurrence n={n} λ={lambda}")
            })?;
            if lambda >= 2 {
                let tp = walk_offdiag(n, lambda - 1).map_err(|e| e.to_string())? as i128;
                let dp = walk_diag(n, lambda - 1).map_err(|e| e.to_string())? as i128;
                let ni = n as i128;
                ensure(t == (ni - 2) * tp + dp, || format!("t step n={n} λ={lambda}"))?;
                ensure(d == (ni - 1) * tp, || format!("d step n={n} λ={lambda}"))?;
            }
            // Diagonal minus off-diagonal is (-1)^λ.
            ensure(d - t == sign, || format!("d - t = {} at n={n} λ={lambda}", d - t))?;
        }
    }
    let (t, d) = (walk_offdiag(3, 1).unwrap() as i128, walk_diag(3, 1).unwrap() as i128);
    Ok(format!(
        "t=(n-2)t'+d', d=(n-1)t', d-t=(-1)^λ exact; the printed form t=d+(-1)^λ fails (n=3, λ=1: t={t}, d-1={})",
        d - 1
    ))
}

fn lb_correctness() -> Outcome {
    let mut rng = seeded(0xacc4);
    let mut checked = 0;
    for trial in 0..100 {
        let n = rng.random_range(3..=8u32);
        let p = rng.random_range(0.2..0.9);
        let g = common::bernoulli_graph(n, p, &mut rng);
        for lambda in [2usize, 3] {
            let (sigma, total) = common::brute_force_betweenness(&g, lambda);
            match betweenness_table(&g, lambda) {
                Err(_) => ensure(total == 0, || {
                    format!("trial {trial} λ={lambda}: table failed but {total} paths")
                })?,
                Ok(table) => {
                    ensure(table.total_paths == total as f64, || {
                        format!("trial {trial} λ={lambda}: total {} vs {total}", table.total_paths)
                    })?;
                    let sigma_sum: u64 = sigma.values().sum();
                    for row in &table.rows {
                        let s = sigma[&row.node];
                        ensure(row.sigma == s as f64, || {
                            format!("trial {trial} λ={lambda} node {}: sigma {} vs {s}", row.node, row.sigma)
                        })?;
                        let lb = s as f64 / sigma_sum as f64;
                        ensure((row.lb - lb).abs() < 1e-12, || {
                            format!("trial {trial}: lb {} vs {lb}", row.lb)
                        })?;
                    }
                    let lb_sum: f64 = table.rows.iter().map(|r| r.lb).sum();
                    ensure((lb_sum - 1.0).abs() < 1e-9, || format!("LB sums to {lb_sum}"))?;
                    checked += 1;
                }
            }
        }
    }
    for n in 3..=8 {
        let t = betweenness_table(&WeightedGraph::complete(n), 2).map_err(|e| e.to_string())?;
        let (lo, hi) = t
            .rows
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r.lb), hi.max(r.lb)));
        ensure(hi - lo < 1e-12 && (hi - 1.0 / n as f64).abs() < 1e-12, || {
            format!("K_{n}: LB spread {lo}..{hi}")
        })?;
    }
    Ok(format!("{checked} (graph, λ) tables equal brute force; K_n uniform"))
}

fn complete_graph_maximum() -> Outcome {
    let start = Instant::now();
    let d = degree_grp(&WeightedGraph::complete(20), 2, &LbEstimator::default()).map_err(|e| e.to_string())?;
    ensure((d.value - 1.0).abs() < 1e-9 && !d.estimated, || {
        format!("d_grp(K_20) = {d:?}")
    })?;
    let densities = [0.2, 0.4, 0.6, 0.8, 1.0];
    let pts = density_sweep(20, 2, &densities, 20, &mut seeded(0xf15)).map_err(|e| e.to_string())?;
    let mut curve = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (ma, mb) = (a.mean.ok_or("gap in sweep")?, b.mean.ok_or("gap in sweep")?);
        let se = (a.std_error.unwrap_or(0.0).powi(2) + b.std_error.unwrap_or(0.0).powi(2)).sqrt();
        ensure(mb >= ma - se, || {
            format!("mean drops {ma} -> {mb} beyond pooled se {se}")
        })?;
    }
    for p in &pts {
        curve.push(format!("{}:{:.5}", p.density, p.mean.unwrap_or(f64::NAN)));
    }
    let last = pts.last().and_then(|p| p.mean).ok_or("no endpoint")?;
    ensure((last - 1.0).abs() < 1e-9, || format!("density 1.0 mean {last}"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("d_grp(K_20,λ=2)=1; sweep {}", curve.join(" ")))
}

fn adversary_bound() -> Outcome {
    let model = AdversaryModel::uniform(10, 100).map_err(|e| e.to_string())?;
    let p = adversary_success(&model);
    ensure(p == 0.01, || format!("uniform success {p}"))?;

    let nodes: Vec<_> = (0..100u32)
        .map(|i| onionsel::Node::new(i, "US", 100.0).unwrap())
        .collect();
    let marked = |v: NodeId| v.0 < 10;
    // Brute force over ordered (entry, exit) pairs of distinct relays.
    let mut hits = 0u64;
    let mut pairs = 0u64;
    for a in 0..100u32 {
        for b in 0..100u32 {
            if a != b {
                pairs += 1;
                hits += u64::from(marked(NodeId(a)) && marked(NodeId(b)));
            }
        }
    }
    let oracle = hits as f64 / pairs as f64;
    let mut rng = seeded(0xad5);
    let draws = 100_000;
    let mut both = 0u64;
    for _ in 0..draws {
        let c = select_random(&nodes, NodeId(1000), 3, &mut rng).map_err(|e| e.to_string())?;
        both += u64::from(marked(c.entry()) && marked(c.exit()));
    }
    let freq = both as f64 / draws as f64;
    ensure((freq - oracle).abs() <= 0.002, || {
        format!("empirical {freq} vs {oracle}")
    })?;
    Ok(format!(
        "(c/n)^2 = {p}; empirical {freq:.5} vs without-replacement {oracle:.5}"
    ))
}

fn ewma_semantics() -> Outcome {
    let a = alpha(Timestamp(0), Timestamp(5), Timestamp(10)).map_err(|e| e.to_string())?;
    ensure(a == 0.5, || format!("alpha(0,5,10) = {a}"))?;
    let mut rng = seeded(0xe3a);
    let (x, y) = (NodeId(0), NodeId(1));
    let mut cases = [0usize; 4];
    for i in 0..10_000 {
        let t0 = rng.random_range(0..1000u64);
        let tp = t0 + rng.random_range(0..1000u64);
        let tq = tp + rng.random_range(0..1000u64).max(u64::from(tp == t0));
        let lp = rng.random_bool(0.7).then(|| rng.random_range(0.0..500.0));
        let lq = rng.random_bool(0.8).then(|| rng.random_range(0.0..500.0));
        let disconnect_between = lp.is_some() && rng.random_bool(0.2);

        let mut g = LatencyGraph::new([x, y, NodeId(2)], NodeId(2), Timestamp(t0)).map_err(|e| e.to_string())?;
        if let Some(v) = lp {
            g.update_label(x, y, Latency::Ms(v), Timestamp(tp))
                .map_err(|e| e.to_string())?;
            if disconnect_between {
                g.update_label(x, y, Latency::Undefined, Timestamp(tp))
                    .map_err(|e| e.to_string())?;
            }
        }
        let observed = lq.map_or(Latency::Undefined, Latency::Ms);
        g.update_label(x, y, observed, Timestamp(tq))
            .map_err(|e| e.to_string())?;
        let label = g.label(x, y).map_err(|e| e.to_string())?;

        let prev_time = if lp.is_some() { tp } else { t0 };
        let (want, want_time, want_edge, case) = match (lp, lq) {
            (_, None) => (lp, prev_time, false, 0),
            (None, Some(q)) => (Some(q), tq, true, 1),
            (Some(p), Some(q)) => {
                let a = (tp - t0) as f64 / (tq - t0) as f64;
                (
                    Some(a * p + (1.0 - a) * q),
                    tq,
                    true,
                    if disconnect_between { 3 } else { 2 },
                )
            }
        };
        cases[case] += 1;
        let got = label.latency.ms();
        let same = match (got, want) {
            (Some(g), Some(w)) => (g - w).abs() <= 1e-9 * w.abs().max(1.0),
            (None, None) => true,
            _ => false,
        };
        ensure(
            same && label.measured_at == Timestamp(want_time) && g.has_edge(x, y) == want_edge,
            || format!("case {i}: t0={t0} tp={tp} tq={tq} lp={lp:?} lq={lq:?} got {label:?}"),
        )?;
    }
    ensure(cases.iter().all(|&c| c > 0), || format!("case coverage {cases:?}"))?;
    Ok(format!(
        "alpha(0,5,10)=0.5; 10^4 updates (disconnect {}, first {}, smoothed {}, after retention {})",
        cases[0], cases[1], cases[2], cases[3]
    ))
}

fn strategy_distributions() -> Outcome {
    let config = Config::default_config();
    let spec = config.population_spec().map_err(|e| e.to_string())?;
    let nodes = generate_population(&spec, &mut seeded(8)).map_err(|e| e.to_string())?;
    let client = NodeId(100);
    let ctx = PmfContext {
        nodes: &nodes,
        home_country: Some("US"),
        analytical_graph: None,
        lambda: 2,
        estimator: LbEstimator::default(),
    };
    let draws = 100_000u64;
    let mut report = Vec::new();
    for kind in [StrategyKind::Rnd, StrategyKind::Geo, StrategyKind::Bw] {
        let pmf = strategy_pmf(kind, &ctx).map_err(|e| e.to_string())?;
        let mut rng = seeded(0xd157 + kind as u64);
        let mut counts: BTreeMap<NodeId, u64> = BTreeMap::new();
        for _ in 0..draws {
            let c = match kind {
                StrategyKind::Rnd => select_random(&nodes, client, 3, &mut rng),
                StrategyKind::Geo => select_geo(&nodes, client, 3, "US", &mut rng),
                _ => select_bw(&nodes, client, 3, &mut rng),
            }
            .map_err(|e| e.to_string())?;
            *counts.entry(c.entry()).or_default() += 1;
        }
        let tv = common::total_variation(&counts, draws, &pmf);
        ensure(tv < 0.02, || format!("{kind}: TV {tv}"))?;
        report.push(format!("{kind} TV={tv:.4}"));
    }
    let empty = LatencyGraph::new((0..=100).map(NodeId), client, Timestamp(0)).map_err(|e| e.to_string())?;
    let mut rng = seeded(0xe0);
    let runs = 1000;
    let mut fallbacks = 0;
    for _ in 0..runs {
        let c = select_grp(&empty, 3, GrpParams::default(), &mut rng).map_err(|e| e.to_string())?;
        fallbacks += usize::from(c.provenance() == Provenance::RandomFallback);
    }
    ensure(fallbacks == runs, || {
        format!("fallback rate {}", fallbacks as f64 / runs as f64)
    })?;
    Ok(format!("{}; empty-graph grp fallback rate 1", report.join(", ")))
}

fn experiment_trends() -> Outcome {
    let start = Instant::now();
    let config = Config::default_config();
    ensure(config.experiment.repetitions == 100, || {
        "default repetitions changed".into()
    })?;
    let result = run_experiment(&config).map_err(|e| e.to_string())?;
    ensure(result.failures.is_empty(), || {
        format!("failed cells: {:?}", result.failures)
    })?;
    let avg = |s, p, d| {
        result
            .cell(s, p, d)
            .map(|c| c.avg_s)
            .ok_or(format!("missing cell {s} {p} {d}"))
    };
    let std = |s, p, d| {
        result
            .cell(s, p, d)
            .map(|c| c.std_s)
            .ok_or(format!("missing cell {s} {p} {d}"))
    };
    use StrategyKind::*;
    let (geo, grp, bw, rnd) = (
        avg(Geo, 320, 3)?,
        avg(Grp, 320, 3)?,
        avg(Bw, 320, 3)?,
        avg(Rnd, 320, 3)?,
    );
    ensure(geo < grp && grp < bw && bw < rnd, || {
        format!("δ=3, 320 KB: geo {geo} grp {grp} bw {bw} rnd {rnd}")
    })?;
    for kind in StrategyKind::ALL {
        for &page in &config.experiment.page_sizes_kb {
            for w in config.experiment.circuit_lengths.windows(2) {
                let (a, b) = (avg(kind, page, w[0])?, avg(kind, page, w[1])?);
                ensure(a <= b, || {
                    format!("{kind} {page} KB: avg δ={} {a} > δ={} {b}", w[0], w[1])
                })?;
            }
        }
    }
    let geo_std = std(Geo, 320, 3)?;
    for kind in [Grp, Bw, Rnd] {
        let s = std(kind, 320, 3)?;
        ensure(geo_std < s, || format!("geo std {geo_std} >= {kind} std {s}"))?;
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "δ=3 320 KB avg geo {geo:.3} < grp {grp:.3} < bw {bw:.3} < rnd {rnd:.3}; monotone in δ; geo std {geo_std:.3} smallest"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_onionsel"))
            .env_remove("ONIONSEL_SEED")
            .args(["run", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("run {run} failed: {}", String::from_utf8_lossy(&status.stderr))
        })?;
        outputs.push((
            std::fs::read(out.join("results.csv")).map_err(|e| e.to_string())?,
            std::fs::read(out.join("samples.csv")).map_err(|e| e.to_string())?,
        ));
    }
    ensure(outputs[0] == outputs[1], || "CSV outputs differ".into())?;
    Ok(format!("two runs, {} byte summary CSV identical", outputs[0].0.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form degrees", closed_form_degrees),
        ("walk calculus", walk_calculus),
        ("recurrence fidelity", recurrence_fidelity),
        ("LB correctness", lb_correctness),
        ("complete-graph maximum", complete_graph_maximum),
        ("adversary bound", adversary_bound),
        ("EWMA semantics", ewma_semantics),
        ("strategy distributions", strategy_distributions),
        ("experiment trends", experiment_trends),
        ("determinism", determinism),
    ];
    // Skip under `cargo test -- --list` and similar harness probes.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
