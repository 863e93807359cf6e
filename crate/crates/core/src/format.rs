//! JSON interchange schemas for graphs and scenario manifests.

use serde::{Deserialize, Serialize};

use crate::graph::{Detail, GraphError, Label, LabeledGraph, NodeId, Side};
use crate::scalar::Pheromone;
use crate::scenario::GenParams;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub label: Label,
    pub detail: Detail,
}

/// On-disk graph: `{ "vocabSize", "nodes": [{id,label,detail}], "edges": [[u,v]] }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphFile {
    pub vocab_size: usize,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl GraphFile {
    pub fn from_graph<P: Pheromone>(g: &LabeledGraph<P>) -> Result<Self, GraphError> {
        if g.node_count() != g.node_capacity() {
            return Err(GraphError::HasRemovedNodes);
        }
        Ok(Self {
            vocab_size: g.vocab_size(),
            nodes: g
                .node_ids()
                .map(|id| NodeRecord {
                    id,
                    label: g.node(id).label,
                    detail: g.node(id).detail,
                })
                .collect(),
            edges: g.edge_ids().map(|e| g.edge(e).ends).collect(),
        })
    }

    pub fn to_graph<P: Pheromone>(&self, side: Side) -> Result<LabeledGraph<P>, GraphError> {
        let mut g = LabeledGraph::new(side, self.vocab_size);
        let mut nodes = self.nodes.clone();
        nodes.sort_by_key(|n| n.id);
        for (expected, n) in nodes.iter().enumerate() {
            if n.id != expected {
                return Err(GraphError::NonContiguousIds { expected, found: n.id });
            }
            g.add_node(n.label, n.detail)?;
        }
        for &(u, v) in &self.edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }
}

/// `scenario.json`: generation parameters plus the kernel embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioManifest {
    pub params: GenParams,
    pub seed: u64,
    pub kernel_to_query: Vec<NodeId>,
    pub kernel_to_data: Vec<NodeId>,
}
