//! The stigmergic tick loop.
//!
//! Each tick runs six phases in a fixed order:
//!
//! 1. refresh live-edge counts on every retained node;
//! 2. for each peered query node, refresh its peer weights and spawn
//!    `1 + 2 · liveEdges` agents;
//! 3. step every agent once (completed circuits deposit pheromone);
//! 4. recompute neighbor-pheromone vectors;
//! 5. evaporate node pheromone and neighbor vectors;
//! 6. evaporate edge pheromone.
//!
//! An agent walks query start → data peer → data neighbor → query peer, and
//! closes the circuit if that query peer is adjacent to its start. A circuit
//! takes four steps, one per tick.

use std::time::{Duration, Instant};

use arrayvec::ArrayVec;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{EdgeId, Label, LabeledGraph, NodeId, Side};
use crate::matching::MatchRegistry;
use crate::peering::{self, PeerError, PeerIndex, PeerLink};
use crate::scalar::{above_floor, floor, Pheromone};
use crate::scenario::Scenario;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid engine parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Peer(#[from] PeerError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineParams {
    /// Fraction of pheromone kept by each evaporation (`1 - ρ`).
    pub retain: f64,
    pub deposit: f64,
    pub plateau_ticks: usize,
    pub max_ticks: usize,
    /// Cap on agents spawned per tick; `None` means ten per original query node.
    pub max_agents_per_tick: Option<usize>,
    pub seed: u64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            retain: 0.9,
            deposit: 0.1,
            plateau_ticks: 10,
            max_ticks: 1000,
            max_agents_per_tick: None,
            seed: 0,
        }
    }
}

impl EngineParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.retain > 0.0 && self.retain < 1.0) {
            return Err(EngineError::InvalidParams(format!(
                "retained fraction {} outside (0, 1)",
                self.retain
            )));
        }
        if self.deposit.is_nan() || self.deposit <= 0.0 {
            return Err(EngineError::InvalidParams(format!(
                "deposit {} must be positive",
                self.deposit
            )));
        }
        Ok(())
    }
}

/// Roulette selection over `n` candidates: index `i` is drawn with probability
/// `weight(i) / Σ weight`. Returns `None` when there are no candidates or the
/// total weight is at or below the pheromone floor.
pub fn roulette_by<P: Pheromone, R: Rng + ?Sized>(n: usize, weight: impl Fn(usize) -> P, rng: &mut R) -> Option<usize> {
    let total: P = (0..n).map(&weight).filter(|&w| w > P::zero()).sum();
    if total <= floor::<P>() {
        return None;
    }
    let target = P::lit(rng.gen::<f64>()) * total;
    let mut acc = P::zero();
    let mut last = None;
    for i in 0..n {
        let w = weight(i);
        if w <= P::zero() {
            continue;
        }
        acc = acc + w;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}

pub fn roulette<P: Pheromone, R: Rng + ?Sized>(weights: &[P], rng: &mut R) -> Option<usize> {
    roulette_by(weights.len(), |i| weights[i], rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entity {
    Node(NodeId),
    Edge(EdgeId),
}

/// One entry of an agent's history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Visit {
    pub side: Side,
    pub entity: Entity,
}

impl Visit {
    pub fn node(side: Side, id: NodeId) -> Self {
        Self {
            side,
            entity: Entity::Node(id),
        }
    }

    pub fn edge(side: Side, id: EdgeId) -> Self {
        Self {
            side,
            entity: Entity::Edge(id),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    SeekPeerInData = 1,
    SeekNeighborInData = 2,
    SeekPeerInQuery = 3,
    SeekStart = 4,
}

pub type History = ArrayVec<Visit, 6>;

#[derive(Clone, Debug)]
pub struct Agent {
    pub start: NodeId,
    pub location: (Side, NodeId),
    pub mode: Mode,
    pub history: History,
    pub start_nbr: Label,
}

impl Agent {
    pub fn new(start: NodeId, start_nbr: Label) -> Self {
        let mut history = History::new();
        history.push(Visit::node(Side::Query, start));
        Self {
            start,
            location: (Side::Query, start),
            mode: Mode::SeekPeerInData,
            history,
            start_nbr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Deallocated,
    /// Circuit closed, pheromone deposited; the agent is gone.
    Completed,
}

/// Tick phases, in the order they must occur.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    LiveEdges,
    Spawn,
    Step,
    Deposit,
    NbrPhers,
    EvaporateNodes,
    EvaporateEdges,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TickReport {
    pub tick: usize,
    pub spawned: usize,
    pub spawn_failures: usize,
    pub stepped: usize,
    pub deallocated: usize,
    pub circuits: usize,
    pub alive_agents: usize,
    pub matched_edges: usize,
    pub kernel_matched: bool,
    pub query_node_pher: f64,
    pub data_node_pher: f64,
    pub edge_pher: f64,
}

/// Costs of index build, peering and pruning.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeerStats {
    pub comparisons: u64,
    pub elapsed: Duration,
    pub links: usize,
    pub pruned_query: usize,
    pub pruned_data: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub ticks: usize,
    pub converged: bool,
    pub matched_edges: usize,
}

pub struct Engine<P> {
    query: LabeledGraph<P>,
    data: LabeledGraph<P>,
    links: Vec<PeerLink<P>>,
    agents: Vec<Agent>,
    registry: MatchRegistry,
    tick: usize,
    rng: ChaCha8Rng,
    params: EngineParams,
    agent_cap: usize,
    active_query: Vec<NodeId>,
    active_data: Vec<NodeId>,
    query_edges: Vec<EdgeId>,
    data_edges: Vec<EdgeId>,
    kernel_edges: Option<Vec<(NodeId, NodeId)>>,
    peer_stats: PeerStats,
    init_started: Instant,
    kernel_elapsed: Option<Duration>,
    label_scratch: Vec<(Label, P)>,
    nbr_scratch: Vec<(NodeId, EdgeId, P)>,
    #[cfg(debug_assertions)]
    phase_log: Vec<Phase>,
}

impl<P: Pheromone> Engine<P> {
    /// Peers, prunes and initializes the two graphs.
    pub fn new(
        mut query: LabeledGraph<P>,
        mut data: LabeledGraph<P>,
        params: EngineParams,
    ) -> Result<Self, EngineError> {
        params.validate()?;
        query.set_side(Side::Query);
        data.set_side(Side::Data);
        let agent_cap = params.max_agents_per_tick.unwrap_or(10 * query.node_count());

        let t0 = Instant::now();
        let index = PeerIndex::build(&data)?;
        let mut links = peering::peer(&mut query, &mut data, &index);
        let (pruned_query, pruned_data) = peering::prune(&mut query, &mut data);
        let peer_stats = PeerStats {
            comparisons: index.comparisons(),
            elapsed: t0.elapsed(),
            links: links.len(),
            pruned_query,
            pruned_data,
        };
        drop(index);

        let init_started = Instant::now();
        peering::init_pheromones(&mut query, &mut data, &mut links);
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(Self {
            active_query: query.node_ids().collect(),
            active_data: data.node_ids().collect(),
            query_edges: query.edge_ids().collect(),
            data_edges: data.edge_ids().collect(),
            query,
            data,
            links,
            agents: Vec::new(),
            registry: MatchRegistry::new(),
            tick: 0,
            rng,
            params,
            agent_cap,
            kernel_edges: None,
            peer_stats,
            init_started,
            kernel_elapsed: None,
            label_scratch: Vec::new(),
            nbr_scratch: Vec::new(),
            #[cfg(debug_assertions)]
            phase_log: Vec::new(),
        })
    }

    /// Engine over a scenario's query and data, tracking its kernel.
    pub fn from_scenario(scenario: &Scenario<P>, params: EngineParams) -> Result<Self, EngineError> {
        let mut e = Self::new(scenario.query.clone(), scenario.data.clone(), params)?;
        e.track_kernel(scenario.kernel_query_edges());
        Ok(e)
    }

    /// Query edges whose joint match marks kernel recovery.
    pub fn track_kernel(&mut self, query_edges: Vec<(NodeId, NodeId)>) {
        self.kernel_edges = Some(query_edges);
    }

    pub fn query(&self) -> &LabeledGraph<P> {
        &self.query
    }

    pub fn data(&self) -> &LabeledGraph<P> {
        &self.data
    }

    pub fn graph(&self, side: Side) -> &LabeledGraph<P> {
        match side {
            Side::Query => &self.query,
            Side::Data => &self.data,
        }
    }

    fn graph_mut(&mut self, side: Side) -> &mut LabeledGraph<P> {
        match side {
            Side::Query => &mut self.query,
            Side::Data => &mut self.data,
        }
    }

    pub fn links(&self) -> &[PeerLink<P>] {
        &self.links
    }

    pub fn registry(&self) -> &MatchRegistry {
        &self.registry
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn tick_count(&self) -> usize {
        self.tick
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn peer_stats(&self) -> &PeerStats {
        &self.peer_stats
    }

    pub fn agent_cap(&self) -> usize {
        self.agent_cap
    }

    /// Wall time from pheromone initialization to kernel recovery.
    pub fn kernel_elapsed(&self) -> Option<Duration> {
        self.kernel_elapsed
    }

    /// Retained query nodes that have at least one peer.
    pub fn peered_query_nodes(&self) -> &[NodeId] {
        &self.active_query
    }

    #[cfg(debug_assertions)]
    pub fn phase_log(&self) -> &[Phase] {
        &self.phase_log
    }

    #[inline]
    fn mark(&mut self, _phase: Phase) {
        #[cfg(debug_assertions)]
        self.phase_log.push(_phase);
    }

    /// Spawns `1 + 2 · liveEdges` agents on query node `n`, bounded by the
    /// remaining per-tick budget. Returns `(spawned, failed)`; an agent fails
    /// to spawn when the node has no live neighbor label to aim for.
    pub fn spawn_agents(&mut self, n: NodeId, budget: usize) -> (usize, usize) {
        if self.query.node(n).peers.is_empty() {
            return (0, 0);
        }
        let want = 1 + 2 * self.query.node(n).live_edges;
        self.label_scratch.clear();
        self.label_scratch.extend(self.query.node(n).nbr_phers.live());
        let (mut spawned, mut failed) = (0, 0);
        for _ in 0..want {
            if spawned >= budget {
                break;
            }
            let labels = &self.label_scratch;
            match roulette_by(labels.len(), |i| labels[i].1, &mut self.rng) {
                Some(i) => {
                    self.agents.push(Agent::new(n, labels[i].0));
                    spawned += 1;
                }
                None => failed += 1,
            }
        }
        (spawned, failed)
    }

    /// Advances one agent by one mode.
    pub fn step_agent(&mut self, a: &mut Agent) -> StepOutcome {
        let (side, here) = a.location;
        match a.mode {
            Mode::SeekPeerInData | Mode::SeekPeerInQuery => {
                let g = match side {
                    Side::Query => &self.query,
                    Side::Data => &self.data,
                };
                let peers = &g.node(here).peers;
                let links = &self.links;
                let Some(i) = roulette_by(peers.len(), |i| links[peers[i]].weight, &mut self.rng) else {
                    return StepOutcome::Deallocated;
                };
                let link = links[peers[i]];
                let (to_side, to) = match side {
                    Side::Query => (Side::Data, link.data),
                    Side::Data => (Side::Query, link.query),
                };
                a.location = (to_side, to);
                a.history.push(Visit::node(to_side, to));
                a.mode = if a.mode == Mode::SeekPeerInData {
                    Mode::SeekNeighborInData
                } else {
                    Mode::SeekStart
                };
                StepOutcome::Continue
            }
            Mode::SeekNeighborInData => {
                let data = &self.data;
                if !above_floor(data.node(here).nbr_phers.get(a.start_nbr)) {
                    return StepOutcome::Deallocated;
                }
                self.nbr_scratch.clear();
                self.nbr_scratch.extend(
                    data.neighbors(here)
                        .iter()
                        .filter(|&&(m, _)| data.node(m).label == a.start_nbr)
                        .map(|&(m, e)| (m, e, data.node(m).pher)),
                );
                let cands = &self.nbr_scratch;
                let Some(i) = roulette_by(cands.len(), |i| cands[i].2, &mut self.rng) else {
                    return StepOutcome::Deallocated;
                };
                let (m, e, _) = cands[i];
                a.location = (Side::Data, m);
                a.history.push(Visit::node(Side::Data, m));
                a.history.push(Visit::edge(Side::Data, e));
                a.mode = Mode::SeekPeerInQuery;
                StepOutcome::Continue
            }
            Mode::SeekStart => {
                let Some(e) = self.query.edge_between(here, a.start) else {
                    return StepOutcome::Deallocated;
                };
                a.history.push(Visit::edge(Side::Query, e));
                self.deposit(&a.history);
                self.registry
                    .record_circuit(&a.history)
                    .expect("agent history is a well-formed circuit");
                if let Some(k) = &self.kernel_edges {
                    if self.kernel_elapsed.is_none() && self.registry.covers(k) {
                        self.kernel_elapsed = Some(self.init_started.elapsed());
                    }
                }
                StepOutcome::Completed
            }
        }
    }

    fn deposit(&mut self, history: &[Visit]) {
        self.mark(Phase::Deposit);
        let amount = P::lit(self.params.deposit);
        for v in history {
            let g = self.graph_mut(v.side);
            match v.entity {
                Entity::Node(n) => {
                    let x = &mut g.node_mut(n).pher;
                    *x = *x + amount;
                }
                Entity::Edge(e) => {
                    let x = &mut g.edge_mut(e).pher;
                    *x = *x + amount;
                }
            }
        }
    }

    /// Scales node pheromone, neighbor vectors and edge pheromone by the
    /// retained fraction, clamping values at or below the floor to zero.
    pub fn evaporate(&mut self) {
        let keep = P::lit(self.params.retain);
        let shrink = |x: P| {
            let y = x * keep;
            if above_floor(y) {
                y
            } else {
                P::zero()
            }
        };
        self.mark(Phase::EvaporateNodes);
        for (g, nodes) in [
            (&mut self.query, &self.active_query),
            (&mut self.data, &self.active_data),
        ] {
            for &n in nodes {
                let node = g.node_mut(n);
                node.pher = shrink(node.pher);
                node.nbr_phers.scale(keep);
            }
        }
        self.mark(Phase::EvaporateEdges);
        for (g, edges) in [(&mut self.query, &self.query_edges), (&mut self.data, &self.data_edges)] {
            for &e in edges {
                let edge = g.edge_mut(e);
                edge.pher = shrink(edge.pher);
            }
        }
    }

    pub fn tick(&mut self) -> TickReport {
        #[cfg(debug_assertions)]
        self.phase_log.clear();
        let mut report = TickReport::default();

        self.mark(Phase::LiveEdges);
        for (g, nodes) in [
            (&mut self.query, &self.active_query),
            (&mut self.data, &self.active_data),
        ] {
            for &n in nodes {
                g.update_live_edges(n);
            }
        }

        self.mark(Phase::Spawn);
        for i in 0..self.active_query.len() {
            let n = self.active_query[i];
            if self.query.node(n).peers.is_empty() {
                continue;
            }
            peering::update_weights(&self.query, &self.data, &mut self.links, n);
            let (s, f) = self.spawn_agents(n, self.agent_cap - report.spawned);
            report.spawned += s;
            report.spawn_failures += f;
        }

        self.mark(Phase::Step);
        let mut agents = std::mem::take(&mut self.agents);
        report.stepped = agents.len();
        agents.retain_mut(|a| match self.step_agent(a) {
            StepOutcome::Continue => true,
            StepOutcome::Deallocated => {
                report.deallocated += 1;
                false
            }
            StepOutcome::Completed => {
                report.deallocated += 1;
                report.circuits += 1;
                false
            }
        });
        self.agents = agents;

        self.mark(Phase::NbrPhers);
        for (g, nodes) in [
            (&mut self.query, &self.active_query),
            (&mut self.data, &self.active_data),
        ] {
            for &n in nodes {
                g.recompute_nbr_phers(n);
            }
        }

        self.evaporate();

        self.tick += 1;
        report.tick = self.tick;
        report.matched_edges = self.registry.close_tick();
        if let Some(k) = &self.kernel_edges {
            report.kernel_matched = self.registry.covers(k);
            if report.kernel_matched && self.registry.first_kernel_match_tick.is_none() {
                self.registry.first_kernel_match_tick = Some(self.tick);
            }
        }
        report.alive_agents = self.agents.len();
        report.query_node_pher = self
            .active_query
            .iter()
            .map(|&n| self.query.node(n).pher.as_f64())
            .sum();
        report.data_node_pher = self.active_data.iter().map(|&n| self.data.node(n).pher.as_f64()).sum();
        report.edge_pher = self
            .query_edges
            .iter()
            .map(|&e| self.query.edge(e).pher.as_f64())
            .sum::<f64>()
            + self
                .data_edges
                .iter()
                .map(|&e| self.data.edge(e).pher.as_f64())
                .sum::<f64>();
        report
    }

    /// Ticks until the matched-edge count plateaus or the tick budget runs out.
    /// `observe` sees the engine after every tick.
    pub fn run_with(&mut self, mut observe: impl FnMut(&Self, &TickReport)) -> RunSummary {
        let empty = self.active_query.is_empty();
        let mut converged = empty;
        while !converged && self.tick < self.params.max_ticks {
            let report = self.tick();
            observe(self, &report);
            converged = self.registry.has_converged(self.params.plateau_ticks);
        }
        RunSummary {
            ticks: self.tick,
            converged,
            matched_edges: self.registry.matched_edge_count(),
        }
    }

    pub fn run(&mut self) -> RunSummary {
        self.run_with(|_, _| {})
    }
}
