//! Match bookkeeping: completed circuits, convergence, retrieval and validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Entity, Visit};
use crate::graph::{Detail, EdgeId, Label, LabeledGraph, NodeId, Side};
use crate::peering::PeerLink;
use crate::scalar::Pheromone;
use crate::scenario::Scenario;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
}

#[inline]
fn ordered(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// One matched edge: `query_ends.i` corresponds to `data_ends.i`, and
/// `query_ends.0 < query_ends.1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeMatch {
    pub query_edge: EdgeId,
    pub data_edge: EdgeId,
    pub query_ends: (NodeId, NodeId),
    pub data_ends: (NodeId, NodeId),
}

#[derive(Clone, Debug, Default)]
pub struct MatchRegistry {
    node_pairs: BTreeSet<(NodeId, NodeId)>,
    edge_matches: BTreeSet<EdgeMatch>,
    query_edges: BTreeSet<(NodeId, NodeId)>,
    per_tick: Vec<usize>,
    pub first_kernel_match_tick: Option<usize>,
}

impl MatchRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a completed circuit history:
    /// `[query start, data peer, data neighbor, data edge, query peer, closing query edge]`.
    /// Returns whether a new edge correspondence was added.
    pub fn record_circuit(&mut self, history: &[Visit]) -> Result<bool, MatchError> {
        use Entity::{Edge, Node};
        use Side::{Data, Query};
        let shape = history.iter().map(|v| (v.side, v.entity)).collect::<Vec<_>>();
        let [(Query, Node(start)), (Data, Node(peer)), (Data, Node(nbr)), (Data, Edge(data_edge)), (Query, Node(back)), (Query, Edge(query_edge))] =
            shape[..]
        else {
            return Err(MatchError::InvalidCircuit(format!(
                "unexpected history shape {shape:?}"
            )));
        };
        if start == back || peer == nbr {
            return Err(MatchError::InvalidCircuit("circuit revisits a node".into()));
        }
        self.node_pairs.insert((start, peer));
        self.node_pairs.insert((back, nbr));
        let (query_ends, data_ends) = if start < back {
            ((start, back), (peer, nbr))
        } else {
            ((back, start), (nbr, peer))
        };
        self.query_edges.insert(query_ends);
        Ok(self.edge_matches.insert(EdgeMatch {
            query_edge,
            data_edge,
            query_ends,
            data_ends,
        }))
    }

    /// Appends the current matched-edge count to the per-tick series.
    pub fn close_tick(&mut self) -> usize {
        let c = self.matched_edge_count();
        self.per_tick.push(c);
        c
    }

    /// Distinct query edges matched so far.
    pub fn matched_edge_count(&self) -> usize {
        self.query_edges.len()
    }

    pub fn per_tick_counts(&self) -> &[usize] {
        &self.per_tick
    }

    pub fn node_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.node_pairs.iter().copied()
    }

    pub fn edge_matches(&self) -> impl Iterator<Item = &EdgeMatch> + '_ {
        self.edge_matches.iter()
    }

    pub fn matched_query_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.query_edges.iter().copied()
    }

    pub fn matched_query_nodes(&self) -> BTreeSet<NodeId> {
        self.node_pairs.iter().map(|p| p.0).collect()
    }

    /// Whether every listed query edge has been matched.
    pub fn covers(&self, query_edges: &[(NodeId, NodeId)]) -> bool {
        query_edges
            .iter()
            .all(|&(u, v)| self.query_edges.contains(&ordered(u, v)))
    }

    /// Matched-edge count unchanged over the last `plateau` ticks.
    pub fn has_converged(&self, plateau: usize) -> bool {
        if plateau == 0 {
            return true;
        }
        if self.per_tick.len() < plateau {
            return false;
        }
        let tail = &self.per_tick[self.per_tick.len() - plateau..];
        tail.iter().all(|&c| c == tail[0])
    }
}

/// Every kernel edge, mapped into the query, is among the matched query edges.
pub fn kernel_matched<P: Pheromone>(registry: &MatchRegistry, scenario: &Scenario<P>) -> bool {
    registry.covers(&scenario.kernel_query_edges())
}

pub fn has_converged(registry: &MatchRegistry, plateau: usize) -> bool {
    registry.has_converged(plateau)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchedNode {
    pub query_id: NodeId,
    pub data_id: NodeId,
    pub label: Label,
    pub detail: Detail,
}

/// The retrieved common subgraph, in query node ids, with its data correspondence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchResult {
    pub nodes: Vec<MatchedNode>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub largest_component: usize,
    pub ticks_to_kernel: Option<usize>,
    pub ticks_to_convergence: usize,
}

impl MatchResult {
    pub fn correspondence(&self) -> BTreeMap<NodeId, NodeId> {
        self.nodes.iter().map(|n| (n.query_id, n.data_id)).collect()
    }

    /// The matched subgraph as a standalone query-side graph. Node `i` of the
    /// returned graph is `self.nodes[i]`.
    pub fn subgraph<P: Pheromone>(&self, vocab_size: usize) -> LabeledGraph<P> {
        let mut g = LabeledGraph::new(Side::Query, vocab_size);
        let mut local = HashMap::new();
        for n in &self.nodes {
            if let Ok(id) = g.add_node(n.label, n.detail) {
                local.insert(n.query_id, id);
            }
        }
        for &(u, v) in &self.edges {
            if let (Some(&a), Some(&b)) = (local.get(&u), local.get(&v)) {
                let _ = g.add_edge(a, b);
            }
        }
        g
    }
}

/// Builds the result from the registry.
///
/// A query node matched to several data nodes keeps one: candidates are taken
/// in order of decreasing current peer weight (ties to the lower data id) and a
/// data node already claimed by another query node is skipped, so the final
/// correspondence is injective. Only matched edges whose recorded data edge
/// agrees with the chosen correspondence are kept; the node set is the
/// endpoints of those edges.
pub fn retrieve_subgraph<P: Pheromone>(
    registry: &MatchRegistry,
    query: &LabeledGraph<P>,
    links: &[PeerLink<P>],
    ticks_to_convergence: usize,
) -> MatchResult {
    let weights: HashMap<(NodeId, NodeId), P> = links.iter().map(|l| ((l.query, l.data), l.weight)).collect();
    let mut pairs: Vec<(P, NodeId, NodeId)> = registry
        .node_pairs()
        .map(|(q, d)| (weights.get(&(q, d)).copied().unwrap_or_else(P::zero), q, d))
        .collect();
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut assigned: HashMap<NodeId, NodeId> = HashMap::new();
    let mut claimed: BTreeSet<NodeId> = BTreeSet::new();
    for (_, q, d) in pairs {
        if !assigned.contains_key(&q) && !claimed.contains(&d) {
            assigned.insert(q, d);
            claimed.insert(d);
        }
    }

    let mut edges = BTreeSet::new();
    for m in registry.edge_matches() {
        let (a, b) = m.query_ends;
        if assigned.get(&a) == Some(&m.data_ends.0) && assigned.get(&b) == Some(&m.data_ends.1) {
            edges.insert((a, b));
        }
    }
    let nodes: BTreeSet<NodeId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let edges: Vec<_> = edges.into_iter().collect();
    MatchResult {
        nodes: nodes
            .into_iter()
            .map(|q| MatchedNode {
                query_id: q,
                data_id: assigned[&q],
                label: query.node(q).label,
                detail: query.node(q).detail,
            })
            .collect(),
        largest_component: largest_component(&edges),
        edges,
        ticks_to_kernel: registry.first_kernel_match_tick,
        ticks_to_convergence,
    }
}

/// Node count of the largest connected component spanned by `edges`.
pub fn largest_component(edges: &[(NodeId, NodeId)]) -> usize {
    let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &(u, v) in edges {
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }
    let mut seen = BTreeSet::new();
    let mut best = 0;
    let mut starts: Vec<_> = adj.keys().copied().collect();
    starts.sort_unstable();
    for s in starts {
        if !seen.insert(s) {
            continue;
        }
        let mut size = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(n) = queue.pop_front() {
            size += 1;
            for &m in &adj[&n] {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        best = best.max(size);
    }
    best
}

/// Component index of every node touched by `edges`.
fn components(edges: &[(NodeId, NodeId)]) -> HashMap<NodeId, usize> {
    let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &(u, v) in edges {
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }
    let mut comp = HashMap::new();
    let mut starts: Vec<_> = adj.keys().copied().collect();
    starts.sort_unstable();
    for s in starts {
        if comp.contains_key(&s) {
            continue;
        }
        let c = comp.len();
        let mut stack = vec![s];
        comp.insert(s, c);
        while let Some(n) = stack.pop() {
            for &m in &adj[&n] {
                if let std::collections::hash_map::Entry::Vacant(e) = comp.entry(m) {
                    e.insert(c);
                    stack.push(m);
                }
            }
        }
    }
    comp
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Clause (a): the image of a matched query edge is not a data edge.
    MissingDataEdge {
        query: (NodeId, NodeId),
        data: (NodeId, NodeId),
    },
    /// Clause (b).
    LabelMismatch { query: NodeId, data: NodeId },
    /// Clause (c).
    DetailMismatch { query: NodeId, data: NodeId },
    /// Clause (d): a query node mapped to more than one data node.
    NotAFunction { query: NodeId, data: Vec<NodeId> },
    /// Clause (d): two query nodes of one component share a data node.
    NotInjective { data: NodeId, query: Vec<NodeId> },
    /// A node or edge the result refers to does not exist.
    UnknownEntity(String),
}

impl Violation {
    pub fn clause(&self) -> &'static str {
        match self {
            Violation::MissingDataEdge { .. } => "a",
            Violation::LabelMismatch { .. } => "b",
            Violation::DetailMismatch { .. } => "c",
            Violation::NotAFunction { .. } | Violation::NotInjective { .. } => "d",
            Violation::UnknownEntity(_) => "structure",
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) ", self.clause())?;
        match self {
            Violation::MissingDataEdge { query, data } => write!(
                f,
                "query edge ({}, {}) maps to ({}, {}), which is not a data edge",
                query.0, query.1, data.0, data.1
            ),
            Violation::LabelMismatch { query, data } => {
                write!(f, "query node {query} and data node {data} carry different labels")
            }
            Violation::DetailMismatch { query, data } => {
                write!(f, "query node {query} and data node {data} carry incompatible details")
            }
            Violation::NotAFunction { query, data } => {
                write!(f, "query node {query} maps to several data nodes {data:?}")
            }
            Violation::NotInjective { data, query } => {
                write!(
                    f,
                    "data node {data} is the image of query nodes {query:?} in one component"
                )
            }
            Violation::UnknownEntity(what) => write!(f, "{what}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `result` is a partial subgraph isomorphism from `query` into `data`.
pub fn validate_match<P: Pheromone>(
    result: &MatchResult,
    query: &LabeledGraph<P>,
    data: &LabeledGraph<P>,
) -> Validation {
    let mut violations = Vec::new();
    let mut images: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for n in &result.nodes {
        images.entry(n.query_id).or_default().insert(n.data_id);
    }
    for (&q, ds) in &images {
        if ds.len() > 1 {
            violations.push(Violation::NotAFunction {
                query: q,
                data: ds.iter().copied().collect(),
            });
        }
    }
    for n in &result.nodes {
        let (q, d) = (n.query_id, n.data_id);
        if q >= query.node_capacity() || d >= data.node_capacity() {
            violations.push(Violation::UnknownEntity(format!("node pair ({q}, {d}) out of range")));
            continue;
        }
        let (qn, dn) = (query.node(q), data.node(d));
        if qn.label != dn.label {
            violations.push(Violation::LabelMismatch { query: q, data: d });
        }
        if !qn.detail.compatible(dn.detail) {
            violations.push(Violation::DetailMismatch { query: q, data: d });
        }
    }
    let map: BTreeMap<NodeId, NodeId> = images.iter().map(|(&q, ds)| (q, *ds.iter().next().unwrap())).collect();
    for &(u, v) in &result.edges {
        let (Some(&x), Some(&y)) = (map.get(&u), map.get(&v)) else {
            violations.push(Violation::UnknownEntity(format!(
                "edge ({u}, {v}) has an unmapped endpoint"
            )));
            continue;
        };
        if u >= query.node_capacity() || v >= query.node_capacity() || query.edge_between(u, v).is_none() {
            violations.push(Violation::UnknownEntity(format!("({u}, {v}) is not a query edge")));
        }
        if x >= data.node_capacity() || y >= data.node_capacity() || data.edge_between(x, y).is_none() {
            violations.push(Violation::MissingDataEdge {
                query: (u, v),
                data: (x, y),
            });
        }
    }
    let comp = components(&result.edges);
    let mut by_image: BTreeMap<(usize, NodeId), Vec<NodeId>> = BTreeMap::new();
    for (&q, &d) in &map {
        let c = comp.get(&q).copied().unwrap_or(usize::MAX - q);
        by_image.entry((c, d)).or_default().push(q);
    }
    for ((_, d), qs) in by_image {
        if qs.len() > 1 {
            violations.push(Violation::NotInjective { data: d, query: qs });
        }
    }
    Validation { violations }
}

/// Provenance of an edge in the merged visualization graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeOrigin {
    Kernel,
    Extension,
}

/// Tags each result edge as part of the known kernel or as an extension.
pub fn tag_origins(result: &MatchResult, kernel_query_edges: &[(NodeId, NodeId)]) -> Vec<(NodeId, NodeId, EdgeOrigin)> {
    let kernel: BTreeSet<_> = kernel_query_edges.iter().map(|&(u, v)| ordered(u, v)).collect();
    result
        .edges
        .iter()
        .map(|&(u, v)| {
            let o = if kernel.contains(&ordered(u, v)) {
                EdgeOrigin::Kernel
            } else {
                EdgeOrigin::Extension
            };
            (u, v, o)
        })
        .collect()
}
