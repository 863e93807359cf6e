//! Node peering between query and data graphs.
//!
//! The data graph is loaded into a sorted `(label, detail)` index so that each
//! query node is resolved with a binary search. Every search comparison is
//! counted, which makes the `O(q · log d)` cost of peering observable.

use std::cell::Cell;
use std::cmp::Ordering;

use thiserror::Error;

use crate::graph::{Detail, Label, LabeledGraph, LinkId, NodeId};
use crate::scalar::Pheromone;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PeerError {
    #[error("data nodes {first} and {second} share identity ({label:?}, {detail})")]
    DuplicateIdentity {
        label: Label,
        detail: Detail,
        first: NodeId,
        second: NodeId,
    },
}

/// Sorted index of data nodes keyed by `(label, detail)`.
#[derive(Debug)]
pub struct PeerIndex {
    entries: Vec<(Label, Detail, NodeId)>,
    has_wildcards: bool,
    comparisons: Cell<u64>,
}

impl PeerIndex {
    /// Indexes every live data node. Identities with detail > 0 must be unique;
    /// wildcard data nodes may repeat.
    pub fn build<P: Pheromone>(data: &LabeledGraph<P>) -> Result<Self, PeerError> {
        let mut entries: Vec<_> = data
            .node_ids()
            .map(|n| (data.node(n).label, data.node(n).detail, n))
            .collect();
        entries.sort_unstable();
        for w in entries.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.0 == b.0 && a.1 == b.1 && !a.1.is_wildcard() {
                return Err(PeerError::DuplicateIdentity {
                    label: a.0,
                    detail: a.1,
                    first: a.2,
                    second: b.2,
                });
            }
        }
        let has_wildcards = entries.iter().any(|e| e.1.is_wildcard());
        Ok(Self {
            entries,
            has_wildcards,
            comparisons: Cell::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Key comparisons performed by lookups since build or the last reset.
    pub fn comparisons(&self) -> u64 {
        self.comparisons.get()
    }

    pub fn reset_comparisons(&self) {
        self.comparisons.set(0);
    }

    /// Data node ids in index order.
    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|e| e.2)
    }

    /// First position whose key is not less than `(label, detail)`.
    fn lower_bound(&self, label: Label, detail: Detail) -> usize {
        let (mut lo, mut hi) = (0, self.entries.len());
        let mut count = 0;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let e = &self.entries[mid];
            count += 1;
            match (e.0, e.1).cmp(&(label, detail)) {
                Ordering::Less => lo = mid + 1,
                _ => hi = mid,
            }
        }
        self.comparisons.set(self.comparisons.get() + count);
        lo
    }

    fn probe(&self, pos: usize, label: Label, detail: Detail) -> Option<NodeId> {
        let e = self.entries.get(pos)?;
        self.comparisons.set(self.comparisons.get() + 1);
        (e.0 == label && e.1 == detail).then_some(e.2)
    }

    /// The data node with exactly this identity.
    pub fn lookup_exact(&self, label: Label, detail: Detail) -> Option<NodeId> {
        let pos = self.lower_bound(label, detail);
        self.probe(pos, label, detail)
    }

    /// All data nodes carrying `label`, in detail order.
    pub fn label_range(&self, label: Label) -> impl Iterator<Item = NodeId> + '_ {
        let lo = self.lower_bound(label, Detail(0));
        let hi = match label.0.checked_add(1) {
            Some(next) => self.lower_bound(Label(next), Detail(0)),
            None => self.entries.len(),
        };
        self.entries[lo..hi].iter().map(|e| e.2)
    }

    /// Data wildcard nodes with `label`.
    fn wildcards(&self, label: Label) -> impl Iterator<Item = NodeId> + '_ {
        let lo = if self.has_wildcards {
            self.lower_bound(label, Detail(0))
        } else {
            self.entries.len()
        };
        self.entries[lo..]
            .iter()
            .take_while(move |e| e.0 == label && e.1.is_wildcard())
            .map(|e| e.2)
    }

    /// Data nodes a query node with this identity peers with.
    pub fn candidates(&self, label: Label, detail: Detail) -> Vec<NodeId> {
        if detail.is_wildcard() {
            return self.label_range(label).collect();
        }
        let mut out: Vec<NodeId> = self.wildcards(label).collect();
        out.extend(self.lookup_exact(label, detail));
        out
    }
}

/// A peering between a query node and a data node. The weight is shared by
/// both endpoints' views of the link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeerLink<P> {
    pub query: NodeId,
    pub data: NodeId,
    pub weight: P,
}

/// Resolves peers for every live query node and mirrors the links onto the
/// data nodes. Weights start at zero.
pub fn peer<P: Pheromone>(
    query: &mut LabeledGraph<P>,
    data: &mut LabeledGraph<P>,
    index: &PeerIndex,
) -> Vec<PeerLink<P>> {
    let mut links = Vec::new();
    let ids: Vec<NodeId> = query.node_ids().collect();
    for q in ids {
        let (label, detail) = (query.node(q).label, query.node(q).detail);
        for d in index.candidates(label, detail) {
            let id: LinkId = links.len();
            links.push(PeerLink {
                query: q,
                data: d,
                weight: P::zero(),
            });
            query.node_mut(q).peers.push(id);
            data.node_mut(d).peers.push(id);
        }
    }
    links
}

/// Removes every node without peers, in both graphs, with its incident edges.
/// Returns the number of nodes removed from (query, data).
pub fn prune<P: Pheromone>(query: &mut LabeledGraph<P>, data: &mut LabeledGraph<P>) -> (usize, usize) {
    let mut removed = (0, 0);
    for (g, count) in [(query, &mut removed.0), (data, &mut removed.1)] {
        let lonely: Vec<NodeId> = g.node_ids().filter(|&n| g.node(n).peers.is_empty()).collect();
        *count = lonely.len();
        for n in lonely {
            g.remove_node(n);
        }
    }
    removed
}

/// Cosine similarity of the two nodes' neighbor-pheromone vectors.
pub fn peer_weight<P: Pheromone>(query: &LabeledGraph<P>, q: NodeId, data: &LabeledGraph<P>, d: NodeId) -> P {
    query.node(q).nbr_phers.cosine(&data.node(d).nbr_phers)
}

/// Recomputes the weight of every link of query node `q`.
pub fn update_weights<P: Pheromone>(
    query: &LabeledGraph<P>,
    data: &LabeledGraph<P>,
    links: &mut [PeerLink<P>],
    q: NodeId,
) {
    for &id in &query.node(q).peers {
        let l = &mut links[id];
        l.weight = peer_weight(query, l.query, data, l.data);
    }
}

/// Sets node pheromone to 1 and edge pheromone to 0 on the retained graphs,
/// then derives neighbor vectors, live-edge counts and peer weights.
pub fn init_pheromones<P: Pheromone>(
    query: &mut LabeledGraph<P>,
    data: &mut LabeledGraph<P>,
    links: &mut [PeerLink<P>],
) {
    for g in [&mut *query, &mut *data] {
        let nodes: Vec<NodeId> = g.node_ids().collect();
        for &n in &nodes {
            g.node_mut(n).pher = P::one();
        }
        let edges: Vec<_> = g.edge_ids().collect();
        for e in edges {
            g.edge_mut(e).pher = P::zero();
        }
        for &n in &nodes {
            g.recompute_nbr_phers(n);
            g.update_live_edges(n);
        }
    }
    for l in links.iter_mut() {
        l.weight = peer_weight(query, l.query, data, l.data);
    }
}
