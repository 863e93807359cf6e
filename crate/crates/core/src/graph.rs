//! Labeled undirected graphs carrying pheromone state.
//!
//! Node and edge ids are dense indices assigned on insertion. Removing a node
//! (pruning) leaves a tombstone so that ids stay stable for the whole run;
//! iteration helpers skip removed entries.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label_vector::LabelVector;
use crate::scalar::{above_floor, Pheromone};

pub type NodeId = usize;
pub type EdgeId = usize;
/// Index into the shared peer-link table (see [`crate::peering::PeerLink`]).
pub type LinkId = usize;

/// Node type, an index into the scenario vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub u32);

impl Label {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Node identity within its label. `0` is the wildcard: type known, identity unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Detail(pub u64);

impl Detail {
    pub const WILDCARD: Detail = Detail(0);

    #[inline]
    pub fn is_wildcard(self) -> bool {
        self.0 == 0
    }

    /// Equal details, or either side is the wildcard.
    #[inline]
    pub fn compatible(self, other: Detail) -> bool {
        self == other || self.is_wildcard() || other.is_wildcard()
    }
}

impl fmt::Display for Detail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Query,
    Data,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("label {label} outside vocabulary of size {vocab_size}")]
    LabelOutOfRange { label: u32, vocab_size: usize },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node ids must be contiguous from 0 (expected {expected}, found {found})")]
    NonContiguousIds { expected: NodeId, found: NodeId },
    #[error("graph has removed nodes and cannot be serialized with contiguous ids")]
    HasRemovedNodes,
}

#[derive(Clone, Debug)]
pub struct Node<P> {
    pub label: Label,
    pub detail: Detail,
    pub pher: P,
    pub nbr_phers: LabelVector<P>,
    pub peers: Vec<LinkId>,
    pub live_edges: usize,
    removed: bool,
}

impl<P> Node<P> {
    pub fn is_removed(&self) -> bool {
        self.removed
    }
}

#[derive(Clone, Debug)]
pub struct Edge<P> {
    pub ends: (NodeId, NodeId),
    pub pher: P,
    removed: bool,
}

impl<P> Edge<P> {
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.ends.0 == n {
            self.ends.1
        } else {
            self.ends.0
        }
    }

    pub fn is_removed(&self) -> bool {
        self.removed
    }
}

#[inline]
fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Clone, Debug)]
pub struct LabeledGraph<P> {
    side: Side,
    vocab_size: usize,
    nodes: Vec<Node<P>>,
    edges: Vec<Edge<P>>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    edge_index: HashMap<(NodeId, NodeId), EdgeId>,
    removed_nodes: usize,
    removed_edges: usize,
}

impl<P: Pheromone> LabeledGraph<P> {
    pub fn new(side: Side, vocab_size: usize) -> Self {
        Self {
            side,
            vocab_size,
            nodes: Vec::new(),
            edges: Vec::new(),
            adjacency: Vec::new(),
            edge_index: HashMap::new(),
            removed_nodes: 0,
            removed_edges: 0,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn set_side(&mut self, side: Side) {
        self.side = side;
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Adds a node with zero pheromone and no peers.
    pub fn add_node(&mut self, label: Label, detail: Detail) -> Result<NodeId, GraphError> {
        if label.index() >= self.vocab_size {
            return Err(GraphError::LabelOutOfRange {
                label: label.0,
                vocab_size: self.vocab_size,
            });
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            label,
            detail,
            pher: P::zero(),
            nbr_phers: LabelVector::new(self.vocab_size),
            peers: Vec::new(),
            live_edges: 0,
            removed: false,
        });
        self.adjacency.push(Vec::new());
        Ok(id)
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<EdgeId, GraphError> {
        for n in [u, v] {
            if !self.contains(n) {
                return Err(GraphError::UnknownNode(n));
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        let k = key(u, v);
        if self.edge_index.contains_key(&k) {
            return Err(GraphError::DuplicateEdge(k.0, k.1));
        }
        let id = self.edges.len();
        self.edges.push(Edge {
            ends: k,
            pher: P::zero(),
            removed: false,
        });
        self.edge_index.insert(k, id);
        self.adjacency[u].push((v, id));
        self.adjacency[v].push((u, id));
        Ok(id)
    }

    /// Live (not removed) node.
    pub fn contains(&self, n: NodeId) -> bool {
        self.nodes.get(n).is_some_and(|x| !x.removed)
    }

    pub fn node(&self, n: NodeId) -> &Node<P> {
        &self.nodes[n]
    }

    pub fn node_mut(&mut self, n: NodeId) -> &mut Node<P> {
        &mut self.nodes[n]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge<P> {
        &self.edges[e]
    }

    pub fn edge_mut(&mut self, e: EdgeId) -> &mut Edge<P> {
        &mut self.edges[e]
    }

    /// Number of live nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.removed_nodes
    }

    /// Number of live edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len() - self.removed_edges
    }

    /// Upper bound on node ids ever issued (live or removed).
    pub fn node_capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&n| !self.nodes[n].removed)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).filter(|&e| !self.edges[e].removed)
    }

    /// `(neighbor, connecting edge)` pairs of a live node.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[n]
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adjacency[n].len()
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.edge_index.get(&key(u, v)).copied()
    }

    /// Removes a node and every edge incident on it.
    pub fn remove_node(&mut self, n: NodeId) {
        if !self.contains(n) {
            return;
        }
        let incident = std::mem::take(&mut self.adjacency[n]);
        for (m, e) in incident {
            self.adjacency[m].retain(|&(_, f)| f != e);
            self.edge_index.remove(&self.edges[e].ends);
            self.edges[e].removed = true;
            self.removed_edges += 1;
        }
        self.nodes[n].removed = true;
        self.nodes[n].peers.clear();
        self.removed_nodes += 1;
    }

    /// Rebuilds `nbr_phers` of `n` from the current pheromone of its neighbors.
    pub fn recompute_nbr_phers(&mut self, n: NodeId) -> &LabelVector<P> {
        let mut acc = std::mem::replace(&mut self.nodes[n].nbr_phers, LabelVector::Dense(Vec::new()));
        acc.clear();
        for &(m, _) in &self.adjacency[n] {
            let nb = &self.nodes[m];
            acc.add(nb.label, nb.pher);
        }
        self.nodes[n].nbr_phers = acc;
        &self.nodes[n].nbr_phers
    }

    /// Incident edges whose pheromone is above the floor.
    pub fn live_edge_count(&self, n: NodeId) -> usize {
        self.adjacency[n]
            .iter()
            .filter(|&&(_, e)| above_floor(self.edges[e].pher))
            .count()
    }

    /// Stores [`Self::live_edge_count`] in the node.
    pub fn update_live_edges(&mut self, n: NodeId) -> usize {
        let c = self.live_edge_count(n);
        self.nodes[n].live_edges = c;
        c
    }
}

/// Undirected edge list over `0..node_count`, without labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub node_count: usize,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl Topology {
    pub fn of<P: Pheromone>(g: &LabeledGraph<P>) -> Self {
        Self {
            node_count: g.node_capacity(),
            edges: g.edge_ids().map(|e| g.edge(e).ends).collect(),
        }
    }
}
