//! `assist`: generate scenarios, run the swarm matcher, sweep experiment
//! dimensions and validate results.
//!
//! Exit codes: 0 success, 1 an invalid match (or failed sweep cell), 2 bad
//! parameters or input, 3 a run that hit the tick limit before converging.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use assist_core::harness::SweepKind;
use assist_core::{EngineParams, GenParams};
use clap::{Args, Parser, Subcommand};

use commands::{BenchPlan, Input, Settings, EXIT_USAGE};
use config::{parse_list, Config};

#[derive(Parser, Debug)]
#[command(
    name = "assist",
    version,
    about = "Approximate subgraph matching by stigmergic swarming"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario seed; engine seeds run from here upward
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Engine seeds per scenario
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Parallel sweep cells
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write per-tick query node pheromone traces
    #[arg(long, global = true)]
    trace_phers: bool,
    /// key = value file; flags on the command line take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Fraction of pheromone kept by each evaporation
    #[arg(long, global = true)]
    evap: Option<f64>,
    /// Pheromone deposited per entity by a closed circuit
    #[arg(long, global = true)]
    deposit: Option<f64>,
    /// Ticks without a new matched edge before stopping
    #[arg(long, global = true)]
    plateau: Option<usize>,
    #[arg(long, global = true)]
    max_ticks: Option<usize>,
    /// Agents spawned per tick (default ten per query node)
    #[arg(long, global = true)]
    max_agents: Option<usize>,

    #[arg(short = 'k', long = "kernel-size", global = true)]
    kernel_size: Option<usize>,
    #[arg(short = 'q', long = "query-size", global = true)]
    query_size: Option<usize>,
    #[arg(short = 'd', long = "data-size", global = true)]
    data_size: Option<usize>,
    /// Label vocabulary size
    #[arg(long, global = true)]
    vocab: Option<usize>,
    /// Fraction of query nodes whose detail is dropped
    #[arg(long, global = true)]
    ablate: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write kernel.json, query.json, data.json and scenario.json
    Generate,
    /// Match a scenario directory, a query/data pair, or a freshly generated scenario
    Run {
        /// Directory written by `generate`
        #[arg(long, conflicts_with_all = ["query", "data"])]
        scenario: Option<PathBuf>,
        #[arg(long, requires = "data")]
        query: Option<PathBuf>,
        #[arg(long, requires = "query")]
        data: Option<PathBuf>,
    },
    /// Sweep one experiment dimension and write rows.csv and medians.csv
    Bench {
        /// data-size, query-size, peering, final-size or ablation
        #[arg(long)]
        sweep: Option<SweepKind>,
        /// Comma-separated grid values (sizes, ablation fractions or scenario seeds)
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated vocabulary sizes crossed with an ablation grid
        #[arg(long)]
        vocabs: Option<String>,
        /// Extend the default grids by an order of magnitude
        #[arg(long)]
        large: bool,
    },
    /// Check a result file against its query and data graphs
    Validate {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn settings(g: &Global, cfg: &Config) -> Result<Settings> {
    let defaults = EngineParams::default();
    let engine = EngineParams {
        retain: cfg.pick(g.evap, "evap")?.unwrap_or(defaults.retain),
        deposit: cfg.pick(g.deposit, "deposit")?.unwrap_or(defaults.deposit),
        plateau_ticks: cfg.pick(g.plateau, "plateau")?.unwrap_or(defaults.plateau_ticks),
        max_ticks: cfg.pick(g.max_ticks, "max-ticks")?.unwrap_or(defaults.max_ticks),
        max_agents_per_tick: cfg.pick(g.max_agents, "max-agents")?,
        seed: 0,
    };
    let seed = cfg.pick(g.seed, "seed")?.unwrap_or(1);
    let base = GenParams::default();
    let gen = GenParams {
        kernel_size: cfg.pick(g.kernel_size, "kernel-size")?.unwrap_or(base.kernel_size),
        query_size: cfg.pick(g.query_size, "query-size")?.unwrap_or(base.query_size),
        data_size: cfg.pick(g.data_size, "data-size")?.unwrap_or(base.data_size),
        vocab_size: cfg.pick(g.vocab, "vocab")?.unwrap_or(base.vocab_size),
        ablate_fraction: cfg.pick(g.ablate, "ablate")?.unwrap_or(base.ablate_fraction),
        seed,
        ..base
    };
    let repeats = cfg.pick(g.repeats, "repeats")?.unwrap_or(5);
    if repeats == 0 {
        anyhow::bail!("repeats must be at least 1");
    }
    let workers = cfg
        .pick(g.workers, "workers")?
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(Settings {
        out: cfg.pick(g.out.clone(), "out")?.unwrap_or_else(|| PathBuf::from("out")),
        seed,
        repeats,
        workers,
        trace_phers: cfg.flag(g.trace_phers, "trace-phers")?,
        engine,
        gen,
    })
}

/// Generation parameters set explicitly, for sweeps whose defaults differ
/// from the single-scenario ones.
fn gen_overrides(g: &Global, cfg: &Config) -> Result<BTreeMap<&'static str, f64>> {
    let mut m = BTreeMap::new();
    for (key, cli) in [
        ("kernel-size", g.kernel_size),
        ("query-size", g.query_size),
        ("data-size", g.data_size),
        ("vocab", g.vocab),
    ] {
        if let Some(v) = cfg.pick(cli, key)? {
            m.insert(key, v as f64);
        }
    }
    if let Some(v) = cfg.pick(g.ablate, "ablate")? {
        m.insert("ablate", v);
    }
    Ok(m)
}

fn dispatch(cli: Cli) -> Result<u8> {
    let cfg = match &cli.global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let s = settings(&cli.global, &cfg)?;
    if let Err(e) = s.engine.validate() {
        eprintln!("error: {e}");
        return Ok(EXIT_USAGE);
    }
    match cli.command {
        Command::Generate => commands::generate(&s),
        Command::Run { scenario, query, data } => {
            let input = match (
                cfg.pick(scenario, "scenario")?,
                cfg.pick(query, "query")?,
                cfg.pick(data, "data")?,
            ) {
                (Some(dir), _, _) => Input::ScenarioDir(dir),
                (None, Some(query), Some(data)) => Input::Graphs { query, data },
                (None, None, None) => Input::Inline,
                _ => anyhow::bail!("--query and --data go together"),
            };
            commands::run(&s, input)
        }
        Command::Bench {
            sweep,
            grid,
            vocabs,
            large,
        } => {
            let Some(kind) = cfg.pick(sweep, "sweep")? else {
                anyhow::bail!("bench needs --sweep");
            };
            let plan = BenchPlan {
                kind,
                grid: cfg.pick(grid, "grid")?.map(|g| parse_list(&g)).transpose()?,
                vocabs: cfg.pick(vocabs, "vocabs")?.map(|v| parse_list(&v)).transpose()?,
                large: cfg.flag(large, "large")?,
                overrides: gen_overrides(&cli.global, &cfg)?,
            };
            commands::bench(&s, plan)
        }
        Command::Validate { result, query, data } => commands::validate(&result, &query, &data),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
