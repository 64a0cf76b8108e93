//! The abstract logical synchrony network: a digraph of machines with
//! integer logical-delay edge labels.
//!
//! A well-formed network has no self-loops, at most one edge per ordered
//! pair, and a strictly positive delay sum around every directed cycle.
//! [`validate_lsn`] reports violations with concrete witnesses;
//! [`normalize_nonnegative`] rewrites mixed-sign labels into an equivalent
//! all-nonnegative network via shortest-path potentials.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Dense index of a machine within its network.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MachineId(pub u32);

impl MachineId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A vertex: one machine with its human-readable label.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Machine {
    pub id: MachineId,
    pub name: String,
}

/// A directed channel labelled with its logical delay.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LsnEdge {
    pub src: MachineId,
    pub dst: MachineId,
    pub lambda: i64,
}

/// The network graph. Construction enforces structural well-formedness
/// (dense ids, unique names, endpoints in range); the semantic conditions
/// are the business of [`validate_lsn`].
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LsnGraph {
    machines: Vec<Machine>,
    edges: Vec<LsnEdge>,
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate machine name `{0}`")]
    DuplicateName(String),
    #[error("edge endpoint {0:?} out of range (machine count {1})")]
    EndpointOutOfRange(MachineId, usize),
}

impl LsnGraph {
    pub fn new(names: Vec<String>, edges: Vec<LsnEdge>) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(GraphError::DuplicateName(name.clone()));
            }
        }
        let machines: Vec<Machine> = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| Machine {
                id: MachineId(i as u32),
                name,
            })
            .collect();
        for e in &edges {
            for end in [e.src, e.dst] {
                if end.index() >= machines.len() {
                    return Err(GraphError::EndpointOutOfRange(end, machines.len()));
                }
            }
        }
        Ok(LsnGraph { machines, edges })
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    pub fn edges(&self) -> &[LsnEdge] {
        &self.edges
    }

    pub fn machine_name(&self, id: MachineId) -> &str {
        &self.machines[id.index()].name
    }

    pub fn find_machine(&self, name: &str) -> Option<MachineId> {
        self.machines.iter().find(|m| m.name == name).map(|m| m.id)
    }

    pub fn edge_between(&self, src: MachineId, dst: MachineId) -> Option<usize> {
        self.edges.iter().position(|e| e.src == src && e.dst == dst)
    }

    /// True when `from` can reach `to` along directed edges.
    pub fn reaches(&self, from: MachineId, to: MachineId) -> bool {
        let mut seen = vec![false; self.machines.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if core::mem::replace(&mut seen[v.index()], true) {
                continue;
            }
            for e in &self.edges {
                if e.src == v && !seen[e.dst.index()] {
                    stack.push(e.dst);
                }
            }
        }
        false
    }

    /// An edge lies on a directed cycle iff its head reaches its tail.
    pub fn edge_on_cycle(&self, edge: usize) -> bool {
        let e = self.edges[edge];
        self.reaches(e.dst, e.src)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ViolationKind {
    SelfLoop { edge: usize },
    DuplicateEdge { src: MachineId, dst: MachineId },
    NonpositiveCycle { cycle: Vec<MachineId>, sum: i64 },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

/// Outcome of [`validate_lsn`]; `ok()` iff no violations were found.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn cycle_detail(graph: &LsnGraph, cycle: &[MachineId], sum: i64) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    for (i, m) in cycle.iter().enumerate() {
        if i > 0 {
            s.push_str(" -> ");
        }
        s.push_str(graph.machine_name(*m));
    }
    if let Some(first) = cycle.first() {
        let _ = write!(s, " -> {}", graph.machine_name(*first));
    }
    let _ = write!(s, " (lambda sum {sum})");
    s
}

/// Rotates a cycle so the smallest machine id comes first, for dedup.
fn canonical_rotation(cycle: &[MachineId]) -> Vec<MachineId> {
    let pos = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, m)| m.0)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut out = Vec::with_capacity(cycle.len());
    out.extend_from_slice(&cycle[pos..]);
    out.extend_from_slice(&cycle[..pos]);
    out
}

fn cycle_sum(graph: &LsnGraph, cycle: &[MachineId]) -> Option<i64> {
    let mut sum = 0i64;
    for i in 0..cycle.len() {
        let a = cycle[i];
        let b = cycle[(i + 1) % cycle.len()];
        let idx = graph.edge_between(a, b)?;
        sum += graph.edges()[idx].lambda;
    }
    Some(sum)
}

/// Bellman–Ford from a virtual zero-source. Returns the potentials, or a
/// witness cycle if a strictly negative cycle exists.
fn bellman_ford_potentials(graph: &LsnGraph) -> Result<Vec<i64>, Vec<MachineId>> {
    let n = graph.machine_count();
    let mut dist = vec![0i64; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut changed_vertex = None;
    for round in 0..n {
        let mut changed = false;
        for (idx, e) in graph.edges().iter().enumerate() {
            if e.src == e.dst {
                continue;
            }
            let cand = dist[e.src.index()] + e.lambda;
            if cand < dist[e.dst.index()] {
                dist[e.dst.index()] = cand;
                pred[e.dst.index()] = Some(idx);
                changed = true;
                changed_vertex = Some(e.dst);
            }
        }
        if !changed {
            return Ok(dist);
        }
        if round == n - 1 {
            // A relaxation in round n means some negative cycle; walk the
            // predecessor chain n steps to land on it, then collect it.
            let mut v = changed_vertex.unwrap();
            for _ in 0..n {
                v = graph.edges()[pred[v.index()].unwrap()].src;
            }
            let start = v;
            let mut cycle = vec![start];
            let mut cur = graph.edges()[pred[start.index()].unwrap()].src;
            while cur != start {
                cycle.push(cur);
                cur = graph.edges()[pred[cur.index()].unwrap()].src;
            }
            cycle.reverse();
            return Err(cycle);
        }
    }
    Ok(dist)
}

/// All-pairs shortest paths (valid when no strictly negative cycle exists),
/// with next-hop reconstruction. `dist[u][v]` is `i64::MAX` when unreachable.
fn floyd_warshall(graph: &LsnGraph) -> (Vec<Vec<i64>>, Vec<Vec<Option<MachineId>>>) {
    let n = graph.machine_count();
    let mut dist = vec![vec![i64::MAX; n]; n];
    let mut next: Vec<Vec<Option<MachineId>>> = vec![vec![None; n]; n];
    for e in graph.edges() {
        if e.src == e.dst {
            continue;
        }
        let (u, v) = (e.src.index(), e.dst.index());
        if e.lambda < dist[u][v] {
            dist[u][v] = e.lambda;
            next[u][v] = Some(e.dst);
        }
    }
    for k in 0..n {
        for u in 0..n {
            if dist[u][k] == i64::MAX {
                continue;
            }
            for v in 0..n {
                if dist[k][v] == i64::MAX {
                    continue;
                }
                let cand = dist[u][k] + dist[k][v];
                if cand < dist[u][v] {
                    dist[u][v] = cand;
                    next[u][v] = next[u][k];
                }
            }
        }
    }
    (dist, next)
}

fn walk_path(next: &[Vec<Option<MachineId>>], from: MachineId, to: MachineId) -> Vec<MachineId> {
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        match next[cur.index()][to.index()] {
            Some(step) => {
                cur = step;
                if cur != to {
                    path.push(cur);
                }
            }
            None => break,
        }
    }
    path
}

/// Checks the network against the model's validity conditions: no
/// self-loops, no duplicate ordered pairs, and every directed cycle with a
/// strictly positive delay sum. Violations carry witnesses (the offending
/// edge or an explicit cycle).
pub fn validate_lsn(graph: &LsnGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut pairs = BTreeSet::new();
    for (idx, e) in graph.edges().iter().enumerate() {
        if e.src == e.dst {
            report.violations.push(Violation {
                kind: ViolationKind::SelfLoop { edge: idx },
                detail: {
                    use core::fmt::Write;
                    let mut s = String::new();
                    let _ = write!(
                        s,
                        "edge {} on {} loops back to its own machine",
                        idx,
                        graph.machine_name(e.src)
                    );
                    s
                },
            });
        }
        if !pairs.insert((e.src, e.dst)) {
            report.violations.push(Violation {
                kind: ViolationKind::DuplicateEdge {
                    src: e.src,
                    dst: e.dst,
                },
                detail: {
                    use core::fmt::Write;
                    let mut s = String::new();
                    let _ = write!(
                        s,
                        "more than one edge {} -> {}",
                        graph.machine_name(e.src),
                        graph.machine_name(e.dst)
                    );
                    s
                },
            });
        }
    }

    match bellman_ford_potentials(graph) {
        Err(cycle) => {
            let sum = cycle_sum(graph, &cycle).unwrap_or(i64::MIN);
            let cycle = canonical_rotation(&cycle);
            let detail = cycle_detail(graph, &cycle, sum);
            report.violations.push(Violation {
                kind: ViolationKind::NonpositiveCycle { cycle, sum },
                detail,
            });
        }
        Ok(_) => {
            // No strictly negative cycle, so all-pairs distances are well
            // defined; the cheapest cycle through each edge exposes any
            // zero- or negative-sum cycle.
            let (dist, next) = floyd_warshall(graph);
            let mut seen = BTreeSet::new();
            for e in graph.edges() {
                if e.src == e.dst {
                    continue;
                }
                let back = dist[e.dst.index()][e.src.index()];
                if back == i64::MAX {
                    continue;
                }
                let sum = e.lambda + back;
                if sum <= 0 {
                    let mut cycle = vec![e.src];
                    let tail = walk_path(&next, e.dst, e.src);
                    cycle.extend(tail);
                    let cycle = canonical_rotation(&cycle);
                    if seen.insert(cycle.clone()) {
                        let detail = cycle_detail(graph, &cycle, sum);
                        report.violations.push(Violation {
                            kind: ViolationKind::NonpositiveCycle { cycle, sum },
                            detail,
                        });
                    }
                }
            }
        }
    }
    report
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum NormalizeError {
    #[error("network is not a valid LSN: {0:?}")]
    Invalid(ValidationReport),
}

/// Relabels delays as `lambda' = lambda + offset[src] - offset[dst]` with
/// every resulting edge >= 0, using Bellman–Ford shortest-path potentials
/// from a virtual source. Cycle sums are untouched by construction (the
/// offsets telescope); the offsets are returned so callers can relabel
/// clocks consistently.
pub fn normalize_nonnegative(graph: &LsnGraph) -> Result<(LsnGraph, Vec<i64>), NormalizeError> {
    let report = validate_lsn(graph);
    if !report.ok() {
        return Err(NormalizeError::Invalid(report));
    }
    let offsets = bellman_ford_potentials(graph).expect("validated graph has no negative cycle");
    let edges = graph
        .edges()
        .iter()
        .map(|e| LsnEdge {
            src: e.src,
            dst: e.dst,
            lambda: e.lambda + offsets[e.src.index()] - offsets[e.dst.index()],
        })
        .collect();
    let normalized = LsnGraph {
        machines: graph.machines.clone(),
        edges,
    };
    debug_assert!(normalized.edges.iter().all(|e| e.lambda >= 0));
    Ok((normalized, offsets))
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum PathError {
    #[error("no edge {0} -> {1}")]
    MissingEdge(String, String),
}

/// Sum of delays along a vertex path; consecutive pairs must be edges.
pub fn cumulative_path_delay(graph: &LsnGraph, path: &[MachineId]) -> Result<i64, PathError> {
    let mut sum = 0i64;
    for pair in path.windows(2) {
        match graph.edge_between(pair[0], pair[1]) {
            Some(idx) => sum += graph.edges()[idx].lambda,
            None => {
                return Err(PathError::MissingEdge(
                    String::from(graph.machine_name(pair[0])),
                    String::from(graph.machine_name(pair[1])),
                ))
            }
        }
    }
    Ok(sum)
}
