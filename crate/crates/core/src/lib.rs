//! Approximate maximum partial subgraph isomorphism by stigmergic swarming.
//!
//! Agents walk short circuits between a labeled query graph and a labeled
//! data graph. Each closed circuit is evidence for one shared edge and leaves
//! pheromone behind; evaporation erases everything that is not reinforced, and
//! matched edges merge into larger common subgraphs over successive ticks.
//!
//! All pheromone-carrying types are generic over [`Pheromone`] (`f32` or
//! `f64`). The aliases below fix the scalar to `f64`.
//!
//! ```
//! use assist_core::{generate_scenario, run_scenario, EngineParams, GenParams, RunOptions, Scenario};
//!
//! let scenario: Scenario = generate_scenario(&GenParams::new(10, 30, 300, 100)).unwrap();
//! let run = run_scenario(&scenario, &EngineParams::default(), &RunOptions::default()).unwrap();
//! assert!(run.validation.is_valid());
//! ```

pub mod engine;
pub mod format;
pub mod graph;
pub mod harness;
pub mod label_vector;
pub mod matching;
pub mod peering;
pub mod scalar;
pub mod scenario;

pub use engine::{roulette, roulette_by, Agent, EngineError, EngineParams, Mode, RunSummary, StepOutcome, TickReport};
pub use format::{GraphFile, NodeRecord, ScenarioManifest};
pub use graph::{Detail, EdgeId, GraphError, Label, NodeId, Side, Topology};
pub use harness::{
    median_ticks, run_cell, run_graphs, run_repeats, run_scenario, run_sweep, CellSummary, HarnessError, MetricsRow,
    RunOptions, RunOutcome, Separation, SweepKind, SweepOutput, SweepSpec, TraceRow,
};
pub use matching::{
    kernel_matched, retrieve_subgraph, tag_origins, validate_match, EdgeOrigin, MatchError, MatchRegistry, MatchResult,
    MatchedNode, Validation, Violation,
};
pub use peering::{PeerError, PeerIndex, PeerLink};
pub use scalar::{Pheromone, PHEROMONE_FLOOR};
pub use scenario::{generate_scenario, GenParams, ScenarioError};

pub type LabeledGraph<P = f64> = graph::LabeledGraph<P>;
pub type Scenario<P = f64> = scenario::Scenario<P>;
pub type Engine<P = f64> = engine::Engine<P>;

pub type LabeledGraph32 = graph::LabeledGraph<f32>;
pub type Scenario32 = scenario::Scenario<f32>;
pub type Engine32 = engine::Engine<f32>;
