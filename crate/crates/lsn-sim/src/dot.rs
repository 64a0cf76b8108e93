//! DOT export of the extended event graph.

use std::fmt::Write;

use lsn_core::extgraph::{ExtEdgeKind, ExtNode, ExtendedGraph, NodeId};
use lsn_core::graph::LsnGraph;

fn node_name(graph: &LsnGraph, ext: &ExtendedGraph, id: NodeId) -> String {
    match ext.node(id) {
        ExtNode::Bottom => "bot".to_string(),
        ExtNode::Top => "top".to_string(),
        ExtNode::Event(e) => format!("{}_{}", graph.machine_name(e.machine), e.count),
    }
}

/// Events as nodes, computation edges solid, communication edges labelled
/// with their delay.
pub fn extended_graph_dot(graph: &LsnGraph, ext: &ExtendedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph extended {{");
    let _ = writeln!(out, "  rankdir=TB;");
    let _ = writeln!(out, "  bot [shape=point label=\"\"];");
    let _ = writeln!(out, "  top [shape=point label=\"\"];");
    for m in graph.machines() {
        for n in 0..ext.horizon {
            let _ = writeln!(
                out,
                "  {}_{} [label=\"({},{})\"];",
                graph.machine_name(m.id),
                n,
                graph.machine_name(m.id),
                n
            );
        }
    }
    for e in &ext.edges {
        let from = node_name(graph, ext, e.from);
        let to = node_name(graph, ext, e.to);
        match e.kind {
            ExtEdgeKind::Computation => {
                let _ = writeln!(out, "  {from} -> {to};");
            }
            ExtEdgeKind::Communication { lambda, .. } => {
                let _ = writeln!(out, "  {from} -> {to} [label=\"{lambda}\" style=dashed];");
            }
        }
    }
    let _ = writeln!(out, "}}");
    out
}
