// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use onionsel::config::Config;
use onionsel::experiment::{self, degree_report, density_sweep, emit_results, OutputFormat, Testbed};
use onionsel::rng::derived;
use onionsel::{Error, Latency, ProbeOracle, Result, Timestamp};

#[derive(Parser)]
#[command(
    name = "onionsel",
    version,
    about = "Circuit selection experiments on a simulated overlay"
)]
struct Cli {
    /// TOML or JSON config; the bundled 100-node default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides experiment.seed.
    #[arg(long, global = true, env = "ONIONSEL_SEED")]
    seed: Option<u64>,
    /// Output directory for run; output file for density-sweep and the probe-demo snapshot.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Measure transfer times over the whole grid.
    Run {
        /// Overrides experiment.repetitions.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Print the anonymity degree of every planned strategy.
    Degrees,
    /// Average grp degree of random graphs against edge density.
    DensitySweep {
        #[arg(long, default_value_t = 20)]
        vertices: u32,
        /// Circuit length; paths on the analytical graph have one edge less.
        #[arg(long, default_value_t = 3)]
        delta: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        densities: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Run the measurement loop and report how the latency graph fills up.
    ProbeDemo {
        /// Overrides experiment.warmup_rounds.
        #[arg(long)]
        rounds: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default_config(),
    };
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
    }
    Ok(config)
}

fn run(cli: &Cli, repetitions: Option<usize>) -> Result<bool> {
    let mut config = load_config(cli)?;
    if let Some(r) = repetitions {
        config.experiment.repetitions = r;
    }
    let result = experiment::run_experiment(&config)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    for path in emit_results(&result, cli.format.into(), &dir)? {
        eprintln!("wrote {}", path.display());
    }
    eprintln!(
        "{} cells, analytical graph density {:.4}",
        result.cells.len(),
        result.graph_density
    );
    for f in &result.failures {
        eprintln!(
            "cell {} {} KB delta {} failed: {}",
            f.strategy, f.page_kb, f.delta, f.error
        );
    }
    Ok(result.failures.is_empty())
}

fn degrees(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let tb = Testbed::build(&config)?;
    let report = degree_report(&config.experiment, &tb.nodes, &tb.graph);
    let mut out = std::io::stdout().lock();
    match cli.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["strategy", "delta", "degree", "estimated", "error"])?;
            for e in &report {
                w.write_record([
                    e.strategy.to_string(),
                    e.delta.map(|d| d.to_string()).unwrap_or_default(),
                    e.degree.map(|d| d.to_string()).unwrap_or_default(),
                    e.estimated.to_string(),
                    e.error.clone().unwrap_or_default(),
                ])?;
            }
            w.flush()
        }
    }
    .map_err(|e| Error::io("<stdout>", e))
}

fn sweep(cli: &Cli, vertices: u32, delta: usize, densities: &[f64], trials: usize) -> Result<()> {
    if delta < 2 {
        return Err(Error::InvalidParameter("delta must be >= 2".into()));
    }
    let seed = load_config(cli)?.experiment.seed;
    let points = density_sweep(vertices, delta - 1, densities, trials, &mut derived(seed, &[0x5eeb]))?;
    let mut text = Vec::new();
    match cli.format {
        Format::Json => {
            text = serde_json::to_vec_pretty(&points)?;
            text.push(b'\n');
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut text);
            w.write_record([
                "density",
                "edges",
                "trials",
                "defined_trials",
                "mean",
                "std_error",
                "gap",
            ])?;
            for p in &points {
                w.write_record([
                    p.density.to_string(),
                    p.edges.to_string(),
                    p.trials.to_string(),
                    p.defined_trials.to_string(),
                    p.mean.map(|v| v.to_string()).unwrap_or_default(),
                    p.std_error.map(|v| v.to_string()).unwrap_or_default(),
                    p.gap.clone().unwrap_or_default(),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<buffer>", e))?;
        }
    }
    write_or_print(cli.out.as_deref(), &text)
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn probe_demo(cli: &Cli, rounds: Option<usize>) -> Result<()> {
    let mut config = load_config(cli)?;
    let total = rounds.unwrap_or(config.experiment.warmup_rounds);
    let checkpoints = 10usize;
    let mut out = std::io::stdout().lock();
    let stdout_err = |e| Error::io("<stdout>", e);
    writeln!(out, "rounds,edges,analytical_density,client_degree").map_err(stdout_err)?;
    let mut done = 0;
    let mut tb = None;
    for i in 1..=checkpoints {
        let target = total * i / checkpoints;
        if target == done && tb.is_some() {
            continue;
        }
        config.experiment.warmup_rounds = target;
        let built = Testbed::build(&config)?;
        let g = built.graph.connectivity_graph();
        writeln!(
            out,
            "{target},{},{:.4},{}",
            g.edge_count(),
            built.graph.analytical_graph().density(),
            g.degree(built.client)
        )
        .map_err(stdout_err)?;
        done = target;
        tb = Some(built);
    }
    let tb = tb.expect("at least one checkpoint");
    let (a, b) = (tb.nodes[0].id, tb.nodes[tb.nodes.len() - 1].id);
    for t in 0..3 {
        let shown = match tb.network.probe(a, b, Timestamp(t)) {
            Latency::Ms(ms) => format!("{ms:.3} ms"),
            Latency::Undefined => "undefined".into(),
        };
        eprintln!("probe {a} -> {b} at t={t}: {shown}");
    }
    if let Some(path) = &cli.out {
        write_or_print(Some(path), tb.graph.to_json()?.as_bytes())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { repetitions } => run(&cli, *repetitions),
        Command::Degrees => degrees(&cli).map(|_| true),
        Command::DensitySweep {
            vertices,
            delta,
            densities,
            trials,
        } => sweep(&cli, *vertices, *delta, densities, *trials).map(|_| true),
        Command::ProbeDemo { rounds } => probe_demo(&cli, *rounds).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        // A closed pipe (e.g. `| head`) is not a failure.
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
