use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use assist_core::harness::{RunOutcome, SweepKind, SweepSpec};
use assist_core::{
    generate_scenario, run_graphs, run_repeats, run_sweep, tag_origins, validate_match, CellSummary, EngineParams,
    GenParams, MatchResult, MetricsRow, NodeId, RunOptions, Scenario, ScenarioManifest, Side,
};
use serde::Serialize;

use crate::output::{load_graph, read_json, save_graph, write_csv, write_json};

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

pub const TICK_COLUMNS: [&str; 12] = [
    "tick",
    "spawned",
    "spawn_failures",
    "stepped",
    "deallocated",
    "circuits",
    "alive_agents",
    "matched_edges",
    "kernel_matched",
    "query_node_pher",
    "data_node_pher",
    "edge_pher",
];

pub const TRACE_COLUMNS: [&str; 4] = ["tick", "query_node", "pher", "running_avg"];

pub const MERGED_COLUMNS: [&str; 5] = ["query_u", "query_v", "data_u", "data_v", "origin"];

pub const SUMMARY_COLUMNS: [&str; 21] = [
    "k",
    "q",
    "d",
    "vocab",
    "ablate",
    "scenario_seed",
    "runs",
    "recovered",
    "converged",
    "valid",
    "ticks_to_kernel_q1",
    "ticks_to_kernel_median",
    "ticks_to_kernel_q3",
    "match_ms_q1",
    "match_ms_median",
    "match_ms_q3",
    "peer_ms_q1",
    "peer_ms_median",
    "peer_ms_q3",
    "peer_comparisons_median",
    "largest_component_median",
];

#[derive(Serialize)]
pub struct MergedEdge {
    pub query_u: NodeId,
    pub query_v: NodeId,
    pub data_u: NodeId,
    pub data_v: NodeId,
    pub origin: assist_core::EdgeOrigin,
}

/// Settings shared by every subcommand, after merging flags and config file.
#[derive(Clone, Debug)]
pub struct Settings {
    pub out: PathBuf,
    pub seed: u64,
    pub repeats: usize,
    pub workers: usize,
    pub trace_phers: bool,
    pub engine: EngineParams,
    pub gen: GenParams,
}

pub fn generate(s: &Settings) -> Result<u8> {
    let scenario: Scenario = match generate_scenario(&s.gen) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_USAGE);
        }
    };
    create_dir(&s.out)?;
    save_graph(&s.out.join("kernel.json"), &scenario.kernel)?;
    save_graph(&s.out.join("query.json"), &scenario.query)?;
    save_graph(&s.out.join("data.json"), &scenario.data)?;
    write_json(&s.out.join("scenario.json"), &scenario.manifest())?;
    println!(
        "wrote scenario k={} q={} d={} vocab={} ablate={} seed={} to {}",
        s.gen.kernel_size,
        s.gen.query_size,
        s.gen.data_size,
        s.gen.vocab_size,
        s.gen.ablate_fraction,
        s.gen.seed,
        s.out.display()
    );
    Ok(EXIT_OK)
}

/// Where `run` takes its graphs from.
pub enum Input {
    /// A directory written by `generate`.
    ScenarioDir(PathBuf),
    /// Bare query and data graphs; no kernel to time.
    Graphs { query: PathBuf, data: PathBuf },
    /// Generate from the settings' parameters.
    Inline,
}

pub fn load_scenario(dir: &Path) -> Result<Scenario> {
    let manifest: ScenarioManifest = read_json(&dir.join("scenario.json"))?;
    let kernel = load_graph(&dir.join("kernel.json"), Side::Query)?;
    let query = load_graph(&dir.join("query.json"), Side::Query)?;
    let data = load_graph(&dir.join("data.json"), Side::Data)?;
    Scenario::from_parts(&manifest, kernel, query, data).with_context(|| format!("scenario in {}", dir.display()))
}

pub fn run(s: &Settings, input: Input) -> Result<u8> {
    let opts = RunOptions {
        trace_phers: s.trace_phers,
        ..RunOptions::default()
    };
    let engine = s.engine.clone().with_seed(s.seed);
    let (outcomes, kernel) = match input {
        Input::ScenarioDir(dir) => {
            let sc = load_scenario(&dir)?;
            (run_repeats(&sc, &engine, s.repeats, &opts)?, sc.kernel_query_edges())
        }
        Input::Inline => {
            let sc: Scenario = match generate_scenario(&s.gen) {
                Ok(sc) => sc,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_USAGE);
                }
            };
            (run_repeats(&sc, &engine, s.repeats, &opts)?, sc.kernel_query_edges())
        }
        Input::Graphs { query, data } => {
            let q = load_graph(&query, Side::Query)?;
            let d = load_graph(&data, Side::Data)?;
            let runs = (0..s.repeats as u64)
                .map(|r| run_graphs(&q, &d, None, None, &engine.clone().with_seed(engine.seed + r), &opts))
                .collect::<Result<Vec<_>, _>>()?;
            (runs, Vec::new())
        }
    };

    create_dir(&s.out)?;
    for o in &outcomes {
        write_run_files(&s.out, o, &kernel, s.trace_phers)?;
    }
    let rows: Vec<MetricsRow> = outcomes.iter().map(|o| o.metrics.clone()).collect();
    write_csv(&s.out.join("metrics.csv"), &MetricsRow::COLUMNS, &rows)?;
    let summaries: Vec<CellSummary> = CellSummary::of(&rows).into_iter().collect();
    write_csv(&s.out.join("medians.csv"), &SUMMARY_COLUMNS, &summaries)?;

    for o in &outcomes {
        for v in &o.validation.violations {
            eprintln!("seed {}: {v}", o.metrics.seed);
        }
    }
    if let Some(c) = summaries.first() {
        println!(
            "{} runs: median ticks to kernel {}, kernel recovered in {}, converged {}, valid {}",
            c.runs,
            c.ticks_to_kernel_median.map_or("none".into(), |m| m.to_string()),
            c.recovered,
            c.converged,
            c.valid
        );
    }
    Ok(verdict(&rows))
}

/// `1` if any run is invalid, else `3` if any failed to converge, else `0`.
fn verdict(rows: &[MetricsRow]) -> u8 {
    if rows.iter().any(|r| !r.valid) {
        EXIT_INVALID
    } else if rows.iter().any(|r| !r.converged) {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    }
}

fn write_run_files(out: &Path, o: &RunOutcome, kernel: &[(NodeId, NodeId)], trace: bool) -> Result<()> {
    let seed = o.metrics.seed;
    write_json(&out.join(format!("result-seed{seed}.json")), &o.result)?;
    write_csv(&out.join(format!("ticks-seed{seed}.csv")), &TICK_COLUMNS, &o.reports)?;
    let map = o.result.correspondence();
    let merged: Vec<MergedEdge> = tag_origins(&o.result, kernel)
        .into_iter()
        .map(|(u, v, origin)| MergedEdge {
            query_u: u,
            query_v: v,
            data_u: map[&u],
            data_v: map[&v],
            origin,
        })
        .collect();
    write_csv(&out.join(format!("merged-seed{seed}.csv")), &MERGED_COLUMNS, &merged)?;
    if trace {
        write_csv(&out.join(format!("trace-seed{seed}.csv")), &TRACE_COLUMNS, &o.trace)?;
    }
    Ok(())
}

/// What `bench` sweeps.
pub struct BenchPlan {
    pub kind: SweepKind,
    pub grid: Option<Vec<f64>>,
    pub vocabs: Option<Vec<usize>>,
    pub large: bool,
    /// Generation parameters the user set explicitly, by config key.
    pub overrides: BTreeMap<&'static str, f64>,
}

/// Default base parameters and grid for each sweep, at desk scale.
fn sweep_defaults(kind: SweepKind, large: bool) -> (GenParams, Vec<f64>, Vec<usize>) {
    match kind {
        SweepKind::DataSize => {
            let mut grid = vec![2000.0, 10000.0, 100000.0];
            if large {
                grid.push(1_000_000.0);
            }
            (GenParams::new(10, 100, 2000, 100), grid, vec![])
        }
        SweepKind::QuerySize => (
            GenParams::new(10, 50, 4000, 100),
            vec![50.0, 100.0, 200.0, 400.0],
            vec![],
        ),
        SweepKind::PeeringScale => {
            let mut grid = vec![1000.0, 2000.0, 4000.0, 8000.0];
            if large {
                grid.extend([100_000.0, 1_000_000.0]);
            }
            (GenParams::new(10, 1000, 1000, 100), grid, vec![])
        }
        SweepKind::FinalSize => (
            GenParams::new(10, 30, 300, 100),
            (1..=20).map(f64::from).collect(),
            vec![],
        ),
        SweepKind::Ablation => (GenParams::new(40, 100, 6000, 100), vec![0.0, 0.25, 0.5], vec![10, 100]),
    }
}

pub fn bench(s: &Settings, plan: BenchPlan) -> Result<u8> {
    let (mut base, grid, vocabs) = sweep_defaults(plan.kind, plan.large);
    for (&key, &v) in &plan.overrides {
        match key {
            "kernel-size" => base.kernel_size = v as usize,
            "query-size" => base.query_size = v as usize,
            "data-size" => base.data_size = v as usize,
            "vocab" => base.vocab_size = v as usize,
            "ablate" => base.ablate_fraction = v,
            _ => bail!("`{key}` cannot be set for a sweep"),
        }
    }
    base.seed = s.seed;
    let mut spec = SweepSpec::new(plan.kind, plan.grid.unwrap_or(grid), base);
    spec.vocabs = plan.vocabs.unwrap_or(vocabs);
    spec.engine = s.engine.clone().with_seed(s.seed);
    spec.repeats = s.repeats;
    if let Err(e) = spec.cells() {
        eprintln!("error: {e}");
        return Ok(EXIT_USAGE);
    }

    let (out, failures) = run_sweep::<f64>(&spec, s.workers)?;
    create_dir(&s.out)?;
    write_csv(&s.out.join("rows.csv"), &MetricsRow::COLUMNS, &out.rows)?;
    write_csv(&s.out.join("medians.csv"), &SUMMARY_COLUMNS, &out.summaries)?;
    for f in &failures {
        eprintln!("failed {f}");
    }
    if !failures.is_empty() {
        std::fs::write(s.out.join("failures.txt"), failures.join("\n") + "\n")?;
    }
    for c in &out.summaries {
        println!(
            "k={} q={} d={} vocab={} ablate={}: median ticks to kernel {}, peer comparisons {}, {}/{} valid",
            c.k,
            c.q,
            c.d,
            c.vocab,
            c.ablate,
            c.ticks_to_kernel_median.map_or("none".into(), |m| m.to_string()),
            c.peer_comparisons_median.unwrap_or(0.0),
            c.valid,
            c.runs
        );
    }
    let invalid = out.rows.iter().any(|r| !r.valid);
    Ok(if invalid || !failures.is_empty() {
        EXIT_INVALID
    } else {
        EXIT_OK
    })
}

pub fn validate(result: &Path, query: &Path, data: &Path) -> Result<u8> {
    let r: MatchResult = read_json(result)?;
    let q = load_graph(query, Side::Query)?;
    let d = load_graph(data, Side::Data)?;
    let v = validate_match(&r, &q, &d);
    if v.is_valid() {
        println!("valid: {} nodes, {} edges", r.nodes.len(), r.edges.len());
        return Ok(EXIT_OK);
    }
    for x in &v.violations {
        println!("{x}");
    }
    println!("invalid: {} violations", v.violations.len());
    Ok(EXIT_INVALID)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use assist_core::engine::TickReport;
    use assist_core::harness::TraceRow;
    use assist_core::EdgeOrigin;

    fn header_of<T: Serialize>(row: &T) -> Vec<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().split(',').map(String::from).collect()
    }

    #[test]
    fn column_lists_match_field_order() {
        let rows =
            assist_core::run_cell::<f64>(&GenParams::new(4, 8, 20, 4), &EngineParams::default(), 1, false).unwrap();
        assert_eq!(header_of(&rows[0]), MetricsRow::COLUMNS);
        assert_eq!(header_of(&CellSummary::of(&rows).unwrap()), SUMMARY_COLUMNS);
        assert_eq!(header_of(&TickReport::default()), TICK_COLUMNS);
        let t = TraceRow {
            tick: 1,
            query_node: 0,
            pher: 1.0,
            running_avg: 1.0,
        };
        assert_eq!(header_of(&t), TRACE_COLUMNS);
        let m = MergedEdge {
            query_u: 0,
            query_v: 1,
            data_u: 2,
            data_v: 3,
            origin: EdgeOrigin::Kernel,
        };
        assert_eq!(header_of(&m), MERGED_COLUMNS);
    }

    #[test]
    fn exit_code_priority() {
        let rows =
            assist_core::run_cell::<f64>(&GenParams::new(4, 8, 20, 4), &EngineParams::default(), 1, false).unwrap();
        let mut r = rows[0].clone();
        r.valid = true;
        r.converged = true;
        assert_eq!(verdict(std::slice::from_ref(&r)), EXIT_OK);
        r.converged = false;
        assert_eq!(verdict(std::slice::from_ref(&r)), EXIT_NOT_CONVERGED);
        r.valid = false;
        assert_eq!(verdict(&[r]), EXIT_INVALID);
    }
}
