//! Scenario generation: a kernel graph embedded in both a query and a data graph.
//!
//! All three topologies come from the same preferential-attachment process.
//! The hosts are grown from a copy of the kernel, so kernel node `i` is node
//! `i` in the query and in the data. Each generation stage draws from its own
//! ChaCha stream keyed by the scenario seed; changing the ablation fraction or
//! a host size therefore leaves the other graphs untouched.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::ScenarioManifest;
use crate::graph::{Detail, GraphError, Label, LabeledGraph, NodeId, Side, Topology};
use crate::scalar::Pheromone;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid kernel embedding: {0}")]
    InvalidEmbedding(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidParams(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenParams {
    pub kernel_size: usize,
    pub query_size: usize,
    pub data_size: usize,
    pub vocab_size: usize,
    pub attachment: usize,
    pub ablate_fraction: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            kernel_size: 10,
            query_size: 30,
            data_size: 300,
            vocab_size: 100,
            attachment: 2,
            ablate_fraction: 0.0,
            seed: 1,
        }
    }
}

impl GenParams {
    pub fn new(kernel_size: usize, query_size: usize, data_size: usize, vocab_size: usize) -> Self {
        Self {
            kernel_size,
            query_size,
            data_size,
            vocab_size,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ablation(mut self, fraction: f64) -> Self {
        self.ablate_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.attachment < 1 {
            return Err(invalid("attachment m must be >= 1"));
        }
        if self.vocab_size < 2 {
            return Err(invalid("vocabulary size must be >= 2"));
        }
        if self.kernel_size <= self.attachment {
            return Err(invalid(format!(
                "kernel size {} must exceed attachment m = {}",
                self.kernel_size, self.attachment
            )));
        }
        if self.kernel_size > self.query_size {
            return Err(invalid(format!(
                "kernel size {} exceeds query size {}",
                self.kernel_size, self.query_size
            )));
        }
        if self.query_size > self.data_size {
            return Err(invalid(format!(
                "query size {} exceeds data size {}",
                self.query_size, self.data_size
            )));
        }
        if !(0.0..=1.0).contains(&self.ablate_fraction) {
            return Err(invalid("ablation fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Stage {
    Kernel = 0,
    Query = 1,
    Data = 2,
    Ablation = 3,
}

fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

/// `m` distinct entries of `pool`, each draw uniform over the multiset.
fn distinct_from<R: Rng + ?Sized>(pool: &[NodeId], m: usize, rng: &mut R) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let x = pool[rng.gen_range(0..pool.len())];
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn grow<R: Rng + ?Sized>(
    mut edges: Vec<(NodeId, NodeId)>,
    mut targets: Option<Vec<NodeId>>,
    mut repeated: Vec<NodeId>,
    first: NodeId,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Topology {
    for source in first..n {
        let chosen = targets.take().unwrap_or_else(|| distinct_from(&repeated, m, rng));
        for &t in &chosen {
            edges.push((t.min(source), t.max(source)));
        }
        repeated.extend_from_slice(&chosen);
        repeated.extend(std::iter::repeat_n(source, m));
    }
    Topology { node_count: n, edges }
}

/// Barabási–Albert graph: nodes `0..m` start edgeless, node `m` joins all of
/// them, every later node joins `m` distinct nodes chosen proportionally to degree.
pub fn generate_ba<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Topology, ScenarioError> {
    if m < 1 || n <= m {
        return Err(invalid(format!(
            "preferential attachment needs n > m >= 1 (n={n}, m={m})"
        )));
    }
    let initial: Vec<NodeId> = (0..m).collect();
    Ok(grow(
        Vec::with_capacity(m * (n - m)),
        Some(initial),
        Vec::with_capacity(2 * m * (n - m)),
        m,
        n,
        m,
        rng,
    ))
}

/// Copies `kernel` onto nodes `0..k` of a new host and grows it to `host_size`
/// by preferential attachment over the whole current host.
pub fn embed_and_grow<R: Rng + ?Sized>(
    kernel: &Topology,
    host_size: usize,
    m: usize,
    rng: &mut R,
) -> Result<Topology, ScenarioError> {
    let k = kernel.node_count;
    if host_size < k {
        return Err(invalid(format!("host size {host_size} smaller than kernel size {k}")));
    }
    if m < 1 {
        return Err(invalid("attachment m must be >= 1"));
    }
    let mut repeated = Vec::with_capacity(2 * (kernel.edges.len() + m * (host_size - k)));
    for &(u, v) in &kernel.edges {
        repeated.push(u);
        repeated.push(v);
    }
    if host_size > k {
        let mut touched = repeated.clone();
        touched.sort_unstable();
        touched.dedup();
        if touched.len() < m {
            return Err(invalid(format!(
                "kernel has {} non-isolated nodes, fewer than attachment m = {m}",
                touched.len()
            )));
        }
    }
    let mut edges = Vec::with_capacity(kernel.edges.len() + m * (host_size - k));
    edges.extend_from_slice(&kernel.edges);
    Ok(grow(edges, None, repeated, k, host_size, m, rng))
}

/// Labels the kernel topology: uniform labels, details counting 1, 2, 3, … per label.
pub fn label_kernel<P: Pheromone, R: Rng + ?Sized>(
    topology: &Topology,
    vocab_size: usize,
    rng: &mut R,
) -> Result<LabeledGraph<P>, ScenarioError> {
    let empty = LabeledGraph::<P>::new(Side::Query, vocab_size);
    assign_identities(topology, &empty, Side::Query, rng)
}

/// Builds a labeled host. Nodes `0..kernel.node_count()` copy the kernel
/// identities; the others get uniform labels and fresh per-label details
/// continuing after the largest kernel detail of that label, so identities
/// are unique in the host and never collide with a kernel identity.
pub fn assign_identities<P: Pheromone, R: Rng + ?Sized>(
    host: &Topology,
    kernel: &LabeledGraph<P>,
    side: Side,
    rng: &mut R,
) -> Result<LabeledGraph<P>, ScenarioError> {
    let vocab = kernel.vocab_size();
    let k = kernel.node_capacity();
    if host.node_count < k {
        return Err(invalid("host smaller than kernel"));
    }
    let mut next = vec![0u64; vocab];
    let mut g = LabeledGraph::new(side, vocab);
    for id in 0..k {
        let n = kernel.node(id);
        next[n.label.index()] = next[n.label.index()].max(n.detail.0);
        g.add_node(n.label, n.detail)?;
    }
    for _ in k..host.node_count {
        let label = rng.gen_range(0..vocab);
        next[label] += 1;
        g.add_node(Label(label as u32), Detail(next[label]))?;
    }
    for &(u, v) in &host.edges {
        g.add_edge(u, v)?;
    }
    Ok(g)
}

/// Sets the detail of `round(fraction · q)` uniformly chosen query nodes to 0.
///
/// Nodes are taken from the front of one random permutation, so for a fixed
/// RNG state the ablated set at a lower fraction is a subset of the set at a
/// higher one. Returns the number of ablated nodes.
pub fn ablate_query<P: Pheromone, R: Rng + ?Sized>(
    query: &mut LabeledGraph<P>,
    fraction: f64,
    rng: &mut R,
) -> Result<usize, ScenarioError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(invalid("ablation fraction must lie in [0, 1]"));
    }
    let mut ids: Vec<NodeId> = query.node_ids().collect();
    let count = (fraction * ids.len() as f64).round_ties_even() as usize;
    ids.shuffle(rng);
    for &id in &ids[..count] {
        query.node_mut(id).detail = Detail::WILDCARD;
    }
    Ok(count)
}

#[derive(Clone, Debug)]
pub struct Scenario<P> {
    pub params: GenParams,
    pub kernel: LabeledGraph<P>,
    pub query: LabeledGraph<P>,
    pub data: LabeledGraph<P>,
    pub kernel_to_query: Vec<NodeId>,
    pub kernel_to_data: Vec<NodeId>,
}

pub fn generate_scenario<P: Pheromone>(params: &GenParams) -> Result<Scenario<P>, ScenarioError> {
    params.validate()?;
    let m = params.attachment;

    let mut rng = stage_rng(params.seed, Stage::Kernel);
    let kernel_topo = generate_ba(params.kernel_size, m, &mut rng)?;
    let kernel = label_kernel::<P, _>(&kernel_topo, params.vocab_size, &mut rng)?;

    let mut rng = stage_rng(params.seed, Stage::Query);
    let topo = embed_and_grow(&kernel_topo, params.query_size, m, &mut rng)?;
    let mut query = assign_identities(&topo, &kernel, Side::Query, &mut rng)?;

    let mut rng = stage_rng(params.seed, Stage::Data);
    let topo = embed_and_grow(&kernel_topo, params.data_size, m, &mut rng)?;
    let data = assign_identities(&topo, &kernel, Side::Data, &mut rng)?;

    let mut rng = stage_rng(params.seed, Stage::Ablation);
    ablate_query(&mut query, params.ablate_fraction, &mut rng)?;

    let identity: Vec<NodeId> = (0..params.kernel_size).collect();
    Ok(Scenario {
        params: params.clone(),
        kernel,
        query,
        data,
        kernel_to_query: identity.clone(),
        kernel_to_data: identity,
    })
}

impl<P: Pheromone> Scenario<P> {
    /// Reassembles a scenario from loaded graphs and checks the embedding invariants.
    pub fn from_parts(
        manifest: &ScenarioManifest,
        kernel: LabeledGraph<P>,
        query: LabeledGraph<P>,
        data: LabeledGraph<P>,
    ) -> Result<Self, ScenarioError> {
        let s = Self {
            params: manifest.params.clone(),
            kernel,
            query,
            data,
            kernel_to_query: manifest.kernel_to_query.clone(),
            kernel_to_data: manifest.kernel_to_data.clone(),
        };
        s.check_embedding()?;
        Ok(s)
    }

    pub fn manifest(&self) -> ScenarioManifest {
        ScenarioManifest {
            params: self.params.clone(),
            seed: self.params.seed,
            kernel_to_query: self.kernel_to_query.clone(),
            kernel_to_data: self.kernel_to_data.clone(),
        }
    }

    /// Kernel edges mapped into query node ids.
    pub fn kernel_query_edges(&self) -> Vec<(NodeId, NodeId)> {
        map_edges(&self.kernel, &self.kernel_to_query)
    }

    /// Kernel edges mapped into data node ids.
    pub fn kernel_data_edges(&self) -> Vec<(NodeId, NodeId)> {
        map_edges(&self.kernel, &self.kernel_to_data)
    }

    /// Injectivity, edge preservation and label agreement of both embeddings.
    /// Details are compared under the wildcard rule, since the query may be ablated.
    pub fn check_embedding(&self) -> Result<(), ScenarioError> {
        let k = self.kernel.node_capacity();
        for (name, map, host) in [
            ("query", &self.kernel_to_query, &self.query),
            ("data", &self.kernel_to_data, &self.data),
        ] {
            let bad = |msg: String| Err(ScenarioError::InvalidEmbedding(format!("{name}: {msg}")));
            if map.len() != k {
                return bad(format!("map covers {} of {k} kernel nodes", map.len()));
            }
            let mut seen = map.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != k {
                return bad("map is not injective".into());
            }
            for (kn, &hn) in map.iter().enumerate() {
                if !host.contains(hn) {
                    return bad(format!("kernel node {kn} maps to missing node {hn}"));
                }
                let (a, b) = (self.kernel.node(kn), host.node(hn));
                if a.label != b.label || !a.detail.compatible(b.detail) {
                    return bad(format!("identity of kernel node {kn} not preserved"));
                }
            }
            for (u, v) in map_edges(&self.kernel, map) {
                if host.edge_between(u, v).is_none() {
                    return bad(format!("kernel edge ({u}, {v}) missing"));
                }
            }
        }
        Ok(())
    }
}

fn map_edges<P: Pheromone>(kernel: &LabeledGraph<P>, map: &[NodeId]) -> Vec<(NodeId, NodeId)> {
    kernel
        .edge_ids()
        .map(|e| {
            let (a, b) = kernel.edge(e).ends;
            (map[a], map[b])
        })
        .collect()
}
