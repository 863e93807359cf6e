//! Run pipeline, metrics rows and experiment sweeps.
//!
//! A run is peering plus the tick loop to convergence, followed by retrieval
//! and independent validation. Sweeps generate one scenario per cell and run
//! it under several engine seeds; cells run in parallel, each run stays
//! single-threaded and seed-deterministic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Engine, EngineError, EngineParams, RunSummary, TickReport};
use crate::graph::{LabeledGraph, NodeId};
use crate::matching::{retrieve_subgraph, validate_match, MatchResult, Validation};
use crate::scalar::Pheromone;
use crate::scenario::{generate_scenario, GenParams, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// Smoothing factor of the per-node running pheromone average.
pub const TRACE_SMOOTHING: f64 = 0.2;

/// One row of the metrics CSV. Column order is the field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub k: usize,
    pub q: usize,
    pub d: usize,
    pub vocab: usize,
    pub ablate: f64,
    pub scenario_seed: u64,
    pub seed: u64,
    pub peer_ms: f64,
    pub peer_comparisons: u64,
    pub match_ticks_to_kernel: Option<usize>,
    pub match_ms_to_kernel: Option<f64>,
    pub ticks_to_convergence: usize,
    pub converged: bool,
    pub matched_edges_final: usize,
    pub largest_component: usize,
    pub valid: bool,
}

impl MetricsRow {
    pub const COLUMNS: [&'static str; 16] = [
        "k",
        "q",
        "d",
        "vocab",
        "ablate",
        "scenario_seed",
        "seed",
        "peer_ms",
        "peer_comparisons",
        "match_ticks_to_kernel",
        "match_ms_to_kernel",
        "ticks_to_convergence",
        "converged",
        "matched_edges_final",
        "largest_component",
        "valid",
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: usize,
    pub query_node: NodeId,
    pub pher: f64,
    pub running_avg: f64,
}

/// Mean pheromone of matched versus peered-but-unmatched query nodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Separation {
    pub matched: usize,
    pub unmatched: usize,
    pub matched_mean: f64,
    pub unmatched_mean: f64,
}

impl Separation {
    pub fn of<P: Pheromone>(engine: &Engine<P>) -> Self {
        let matched_set = engine.registry().matched_query_nodes();
        let mut s = Separation::default();
        let (mut hi, mut lo) = (0.0, 0.0);
        for &n in engine.peered_query_nodes() {
            let p = engine.query().node(n).pher.as_f64();
            if matched_set.contains(&n) {
                s.matched += 1;
                hi += p;
            } else {
                s.unmatched += 1;
                lo += p;
            }
        }
        s.matched_mean = if s.matched > 0 { hi / s.matched as f64 } else { 0.0 };
        s.unmatched_mean = if s.unmatched > 0 { lo / s.unmatched as f64 } else { 0.0 };
        s
    }

    /// `matched_mean / unmatched_mean`, infinite when unmatched nodes carry nothing.
    pub fn ratio(&self) -> f64 {
        if self.unmatched_mean > 0.0 {
            self.matched_mean / self.unmatched_mean
        } else if self.matched_mean > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub trace_phers: bool,
    /// Stop ticking once peering is done (peering-cost sweeps).
    pub peer_only: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub result: MatchResult,
    pub validation: Validation,
    pub metrics: MetricsRow,
    pub summary: RunSummary,
    pub reports: Vec<TickReport>,
    pub per_tick_matched: Vec<usize>,
    pub separation: Separation,
    pub trace: Vec<TraceRow>,
}

/// Runs one engine over `query`/`data`. `kernel` lists the query edges whose
/// recovery is timed; `gen` fills the scenario columns of the metrics row.
pub fn run_graphs<P: Pheromone>(
    query: &LabeledGraph<P>,
    data: &LabeledGraph<P>,
    kernel: Option<Vec<(NodeId, NodeId)>>,
    gen: Option<&GenParams>,
    params: &EngineParams,
    opts: &RunOptions,
) -> Result<RunOutcome, EngineError> {
    let mut engine = Engine::new(query.clone(), data.clone(), params.clone())?;
    if let Some(k) = kernel {
        engine.track_kernel(k);
    }
    let mut reports = Vec::new();
    let mut trace = Vec::new();
    let mut avg: Vec<Option<f64>> = vec![None; query.node_capacity()];
    let summary = if opts.peer_only {
        RunSummary {
            ticks: 0,
            converged: false,
            matched_edges: 0,
        }
    } else {
        engine.run_with(|e, r| {
            reports.push(r.clone());
            if opts.trace_phers {
                for &n in e.peered_query_nodes() {
                    let p = e.query().node(n).pher.as_f64();
                    let a = match avg[n] {
                        Some(prev) => TRACE_SMOOTHING * p + (1.0 - TRACE_SMOOTHING) * prev,
                        None => p,
                    };
                    avg[n] = Some(a);
                    trace.push(TraceRow {
                        tick: r.tick,
                        query_node: n,
                        pher: p,
                        running_avg: a,
                    });
                }
            }
        })
    };

    let result = retrieve_subgraph(engine.registry(), engine.query(), engine.links(), summary.ticks);
    let validation = validate_match(&result, query, data);
    let stats = engine.peer_stats();
    let g = gen.cloned().unwrap_or(GenParams {
        kernel_size: 0,
        query_size: query.node_count(),
        data_size: data.node_count(),
        vocab_size: query.vocab_size(),
        attachment: 0,
        ablate_fraction: 0.0,
        seed: 0,
    });
    let metrics = MetricsRow {
        k: g.kernel_size,
        q: g.query_size,
        d: g.data_size,
        vocab: g.vocab_size,
        ablate: g.ablate_fraction,
        scenario_seed: g.seed,
        seed: params.seed,
        peer_ms: stats.elapsed.as_secs_f64() * 1e3,
        peer_comparisons: stats.comparisons,
        match_ticks_to_kernel: engine.registry().first_kernel_match_tick,
        match_ms_to_kernel: engine.kernel_elapsed().map(|t| t.as_secs_f64() * 1e3),
        ticks_to_convergence: summary.ticks,
        converged: summary.converged,
        matched_edges_final: summary.matched_edges,
        largest_component: result.largest_component,
        valid: validation.is_valid(),
    };
    Ok(RunOutcome {
        separation: Separation::of(&engine),
        per_tick_matched: engine.registry().per_tick_counts().to_vec(),
        result,
        validation,
        metrics,
        summary,
        reports,
        trace,
    })
}

pub fn run_scenario<P: Pheromone>(
    scenario: &Scenario<P>,
    params: &EngineParams,
    opts: &RunOptions,
) -> Result<RunOutcome, EngineError> {
    run_graphs(
        &scenario.query,
        &scenario.data,
        Some(scenario.kernel_query_edges()),
        Some(&scenario.params),
        params,
        opts,
    )
}

/// Runs `repeats` engine seeds (`params.seed`, `params.seed + 1`, …) on one scenario.
pub fn run_repeats<P: Pheromone>(
    scenario: &Scenario<P>,
    params: &EngineParams,
    repeats: usize,
    opts: &RunOptions,
) -> Result<Vec<RunOutcome>, EngineError> {
    (0..repeats as u64)
        .map(|r| run_scenario(scenario, &params.clone().with_seed(params.seed + r), opts))
        .collect()
}

/// Linear-interpolated quantile of an ascending slice. Infinite entries
/// (runs that never recovered the kernel) propagate as infinity.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let (a, b) = (sorted[lo], sorted[hi]);
    if a.is_infinite() || b.is_infinite() {
        return Some(f64::INFINITY);
    }
    Some(a + (b - a) * (pos - lo as f64))
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs
}

fn finite(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite())
}

/// Median ticks-to-kernel, counting runs that never recovered the kernel as
/// slower than any that did. `None` when the median run did not recover it.
pub fn median_ticks(rows: &[MetricsRow]) -> Option<f64> {
    let xs = sorted(
        rows.iter()
            .map(|r| r.match_ticks_to_kernel.map_or(f64::INFINITY, |t| t as f64))
            .collect(),
    );
    finite(quantile(&xs, 0.5))
}

/// Per-cell medians and quartiles, recomputable from the rows file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub k: usize,
    pub q: usize,
    pub d: usize,
    pub vocab: usize,
    pub ablate: f64,
    pub scenario_seed: u64,
    pub runs: usize,
    pub recovered: usize,
    pub converged: usize,
    pub valid: usize,
    pub ticks_to_kernel_q1: Option<f64>,
    pub ticks_to_kernel_median: Option<f64>,
    pub ticks_to_kernel_q3: Option<f64>,
    pub match_ms_q1: Option<f64>,
    pub match_ms_median: Option<f64>,
    pub match_ms_q3: Option<f64>,
    pub peer_ms_q1: Option<f64>,
    pub peer_ms_median: Option<f64>,
    pub peer_ms_q3: Option<f64>,
    pub peer_comparisons_median: Option<f64>,
    pub largest_component_median: Option<f64>,
}

impl CellSummary {
    pub fn of(rows: &[MetricsRow]) -> Option<Self> {
        let first = rows.first()?;
        let ticks = sorted(
            rows.iter()
                .map(|r| r.match_ticks_to_kernel.map_or(f64::INFINITY, |t| t as f64))
                .collect(),
        );
        let ms = sorted(
            rows.iter()
                .map(|r| r.match_ms_to_kernel.unwrap_or(f64::INFINITY))
                .collect(),
        );
        let peer = sorted(rows.iter().map(|r| r.peer_ms).collect());
        let cmp = sorted(rows.iter().map(|r| r.peer_comparisons as f64).collect());
        let lc = sorted(rows.iter().map(|r| r.largest_component as f64).collect());
        Some(Self {
            k: first.k,
            q: first.q,
            d: first.d,
            vocab: first.vocab,
            ablate: first.ablate,
            scenario_seed: first.scenario_seed,
            runs: rows.len(),
            recovered: rows.iter().filter(|r| r.match_ticks_to_kernel.is_some()).count(),
            converged: rows.iter().filter(|r| r.converged).count(),
            valid: rows.iter().filter(|r| r.valid).count(),
            ticks_to_kernel_q1: finite(quantile(&ticks, 0.25)),
            ticks_to_kernel_median: finite(quantile(&ticks, 0.5)),
            ticks_to_kernel_q3: finite(quantile(&ticks, 0.75)),
            match_ms_q1: finite(quantile(&ms, 0.25)),
            match_ms_median: finite(quantile(&ms, 0.5)),
            match_ms_q3: finite(quantile(&ms, 0.75)),
            peer_ms_q1: quantile(&peer, 0.25),
            peer_ms_median: quantile(&peer, 0.5),
            peer_ms_q3: quantile(&peer, 0.75),
            peer_comparisons_median: quantile(&cmp, 0.5),
            largest_component_median: quantile(&lc, 0.5),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Grid over data size.
    DataSize,
    /// Grid over query size.
    QuerySize,
    /// Grid over `q = d`; peering only.
    PeeringScale,
    /// Grid of scenario seeds at fixed sizes; one point per run.
    FinalSize,
    /// Grid over ablation fraction, crossed with the vocabulary list.
    Ablation,
}

impl std::str::FromStr for SweepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "data-size" => SweepKind::DataSize,
            "query-size" => SweepKind::QuerySize,
            "peering" | "peering-scale" => SweepKind::PeeringScale,
            "final-size" => SweepKind::FinalSize,
            "ablation" => SweepKind::Ablation,
            other => return Err(format!("unknown sweep dimension `{other}`")),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    /// Vocabulary sizes crossed with the grid (ablation only; defaults to the base vocabulary).
    pub vocabs: Vec<usize>,
    pub base: GenParams,
    pub engine: EngineParams,
    pub repeats: usize,
    /// Scale the kernel with the query, keeping `k / q` of the base params (query sweeps).
    pub scale_kernel: bool,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, grid: Vec<f64>, base: GenParams) -> Self {
        Self {
            kind,
            grid,
            vocabs: Vec::new(),
            base,
            engine: EngineParams::default(),
            repeats: 5,
            scale_kernel: false,
        }
    }

    /// Generation parameters of every cell, in grid order.
    pub fn cells(&self) -> Result<Vec<GenParams>, HarnessError> {
        if self.grid.is_empty() {
            return Err(HarnessError::InvalidSweep("empty grid".into()));
        }
        if self.repeats == 0 {
            return Err(HarnessError::InvalidSweep("repeats must be >= 1".into()));
        }
        let as_size = |v: f64| -> Result<usize, HarnessError> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(HarnessError::InvalidSweep(format!("grid value {v} is not a size")))
            }
        };
        let mut out = Vec::new();
        for &v in &self.grid {
            let mut p = self.base.clone();
            match self.kind {
                SweepKind::DataSize => p.data_size = as_size(v)?,
                SweepKind::QuerySize => {
                    p.query_size = as_size(v)?;
                    if self.scale_kernel {
                        let ratio = self.base.kernel_size as f64 / self.base.query_size as f64;
                        p.kernel_size = ((ratio * p.query_size as f64).round() as usize).max(p.attachment + 1);
                    }
                }
                SweepKind::PeeringScale => {
                    p.query_size = as_size(v)?;
                    p.data_size = p.query_size;
                }
                SweepKind::FinalSize => p.seed = v as u64,
                SweepKind::Ablation => {
                    p.ablate_fraction = v;
                    if self.vocabs.is_empty() {
                        out.push(p);
                    } else {
                        for &vocab in &self.vocabs {
                            out.push(GenParams {
                                vocab_size: vocab,
                                ..p.clone()
                            });
                        }
                    }
                    continue;
                }
            }
            out.push(p);
        }
        for p in &out {
            p.validate()?;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub rows: Vec<MetricsRow>,
    pub summaries: Vec<CellSummary>,
}

/// Generates the cell's scenario and runs it `repeats` times.
pub fn run_cell<P: Pheromone>(
    gen: &GenParams,
    engine: &EngineParams,
    repeats: usize,
    peer_only: bool,
) -> Result<Vec<MetricsRow>, HarnessError> {
    let scenario = generate_scenario::<P>(gen)?;
    let opts = RunOptions {
        peer_only,
        ..RunOptions::default()
    };
    Ok(run_repeats(&scenario, engine, repeats, &opts)?
        .into_iter()
        .map(|o| o.metrics)
        .collect())
}

/// Runs every cell of the sweep on up to `workers` threads. A cell that fails
/// to generate or run is skipped and reported in the returned error list.
pub fn run_sweep<P: Pheromone>(spec: &SweepSpec, workers: usize) -> Result<(SweepOutput, Vec<String>), HarnessError> {
    let cells = spec.cells()?;
    let peer_only = spec.kind == SweepKind::PeeringScale;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidSweep(e.to_string()))?;
    let results: Vec<Result<Vec<MetricsRow>, HarnessError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_cell::<P>(c, &spec.engine, spec.repeats, peer_only))
            .collect()
    });
    let mut out = SweepOutput::default();
    let mut failures = Vec::new();
    for (cell, r) in cells.iter().zip(results) {
        match r {
            Ok(rows) => {
                out.summaries.extend(CellSummary::of(&rows));
                out.rows.extend(rows);
            }
            Err(e) => failures.push(format!("cell {cell:?}: {e}")),
        }
    }
    Ok((out, failures))
}
