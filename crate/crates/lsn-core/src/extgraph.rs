//! The extended event graph: every machine tick in a horizon-bounded run
//! becomes a node, with computation edges chaining successive local events
//! and communication edges jumping `lambda` ticks ahead on the consumer.
//!
//! A distinguished bottom node precedes every machine's first event and
//! stands in for initial conditions (dependencies whose producer index would
//! be negative); a top node succeeds every final event.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{validate_lsn, LsnGraph, MachineId, ValidationReport};

/// One machine event: the machine together with its tick count.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct EventId {
    pub machine: MachineId,
    pub count: u64,
}

/// Node handle inside an [`ExtendedGraph`]. `0` is bottom, `1` is top,
/// events follow in machine-major order.
pub type NodeId = u32;

pub const BOTTOM: NodeId = 0;
pub const TOP: NodeId = 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ExtNode {
    Bottom,
    Top,
    Event(EventId),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ExtEdgeKind {
    /// (m, n) -> (m, n+1), plus the bottom/top boundary edges.
    Computation,
    /// (i, n) -> (j, n + lambda) for LSN edge i -> j. `lsn_edge` indexes the
    /// source network's edge list.
    Communication { lsn_edge: usize, lambda: i64 },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ExtEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: ExtEdgeKind,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ExtendedGraph {
    pub horizon: u64,
    pub machine_count: usize,
    pub edges: Vec<ExtEdge>,
}

impl ExtendedGraph {
    pub fn node_count(&self) -> usize {
        2 + self.machine_count * self.horizon as usize
    }

    pub fn event_node(&self, machine: MachineId, count: u64) -> NodeId {
        debug_assert!(count < self.horizon);
        2 + (machine.index() as u64 * self.horizon + count) as NodeId
    }

    pub fn node(&self, id: NodeId) -> ExtNode {
        match id {
            BOTTOM => ExtNode::Bottom,
            TOP => ExtNode::Top,
            _ => {
                let ordinal = (id - 2) as u64;
                ExtNode::Event(EventId {
                    machine: MachineId((ordinal / self.horizon) as u32),
                    count: ordinal % self.horizon,
                })
            }
        }
    }

    pub fn communication_edges(&self) -> impl Iterator<Item = &ExtEdge> {
        self.edges
            .iter()
            .filter(|e| matches!(e.kind, ExtEdgeKind::Communication { .. }))
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum BuildError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("network is not a valid LSN: {0:?}")]
    InvalidLsn(ValidationReport),
}

/// Builds the event graph for `horizon` ticks per machine, after validating
/// the network. Communication edges are kept only when both endpoints fall
/// inside the horizon; dependencies from negative producer indices are
/// redirected to bottom (they are initial conditions).
pub fn build_extended_graph(graph: &LsnGraph, horizon: u64) -> Result<ExtendedGraph, BuildError> {
    let report = validate_lsn(graph);
    if !report.ok() {
        return Err(BuildError::InvalidLsn(report));
    }
    if horizon == 0 {
        return Err(BuildError::ZeroHorizon);
    }
    Ok(build_extended_graph_unchecked(graph, horizon))
}

/// As [`build_extended_graph`] without the validity check, so invalid
/// networks can be materialized and fed to [`check_acyclic`].
pub fn build_extended_graph_unchecked(graph: &LsnGraph, horizon: u64) -> ExtendedGraph {
    let mut ext = ExtendedGraph {
        horizon,
        machine_count: graph.machine_count(),
        edges: Vec::new(),
    };
    for m in graph.machines() {
        ext.edges.push(ExtEdge {
            from: BOTTOM,
            to: ext.event_node(m.id, 0),
            kind: ExtEdgeKind::Computation,
        });
        for n in 0..horizon - 1 {
            ext.edges.push(ExtEdge {
                from: ext.event_node(m.id, n),
                to: ext.event_node(m.id, n + 1),
                kind: ExtEdgeKind::Computation,
            });
        }
        ext.edges.push(ExtEdge {
            from: ext.event_node(m.id, horizon - 1),
            to: TOP,
            kind: ExtEdgeKind::Computation,
        });
    }
    for (idx, e) in graph.edges().iter().enumerate() {
        let kind = ExtEdgeKind::Communication {
            lsn_edge: idx,
            lambda: e.lambda,
        };
        for consumer in 0..horizon {
            let producer = consumer as i64 - e.lambda;
            if producer < 0 {
                // Initial condition: the consuming event depends on bottom.
                ext.edges.push(ExtEdge {
                    from: BOTTOM,
                    to: ext.event_node(e.dst, consumer),
                    kind,
                });
            } else if (producer as u64) < horizon {
                ext.edges.push(ExtEdge {
                    from: ext.event_node(e.src, producer as u64),
                    to: ext.event_node(e.dst, consumer),
                    kind,
                });
            }
        }
    }
    ext
}

/// A cycle among event nodes, in traversal order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CycleWitness(pub Vec<NodeId>);

/// Topologically orders the events (Kahn), or returns a cycle witness when
/// the delay labels violated the positive-cycle condition.
pub fn check_acyclic(ext: &ExtendedGraph) -> Result<Vec<NodeId>, CycleWitness> {
    let n = ext.node_count();
    let mut indegree = vec![0u32; n];
    let mut succs: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for e in &ext.edges {
        indegree[e.to as usize] += 1;
        succs[e.from as usize].push(e.to);
    }
    let mut ready: alloc::collections::BinaryHeap<core::cmp::Reverse<NodeId>> = (0..n as NodeId)
        .filter(|&v| indegree[v as usize] == 0)
        .map(core::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(core::cmp::Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in &succs[v as usize] {
            indegree[w as usize] -= 1;
            if indegree[w as usize] == 0 {
                ready.push(core::cmp::Reverse(w));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Some nodes never became ready; chase unresolved predecessors until a
    // node repeats.
    let stuck: Vec<NodeId> = (0..n as NodeId)
        .filter(|&v| indegree[v as usize] > 0)
        .collect();
    let mut pred: Vec<Option<NodeId>> = vec![None; n];
    for e in &ext.edges {
        if indegree[e.to as usize] > 0 && indegree[e.from as usize] > 0 {
            pred[e.to as usize] = Some(e.from);
        }
    }
    let mut seen = vec![false; n];
    let mut cur = stuck[0];
    while !seen[cur as usize] {
        seen[cur as usize] = true;
        cur = pred[cur as usize].expect("stuck node has a stuck predecessor");
    }
    let start = cur;
    let mut cycle = vec![start];
    let mut walk = pred[start as usize].unwrap();
    while walk != start {
        cycle.push(walk);
        walk = pred[walk as usize].unwrap();
    }
    cycle.reverse();
    Err(CycleWitness(cycle))
}
