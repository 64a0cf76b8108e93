//! Run records and the determinacy check.
//!
//! A trace captures machine tick records in processing order plus, per
//! channel, the full life of every frame (production, arrival, consumption)
//! matched by a hidden per-edge sequence number. Sequence numbers never feed
//! machine programs; they exist so latency and delay invariance can be
//! measured exactly.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct MachineMeta {
    pub name: String,
    pub freq_hz: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct EdgeMeta {
    pub src: u32,
    pub dst: u32,
    pub src_name: String,
    pub dst_name: String,
    pub link_delay_ns: u64,
    pub reverse_delay_ns: u64,
    pub capacity: u32,
    pub initial_marking: u64,
    /// The delay label realized by the backend's initial conditions: the
    /// marking for token-pushing backends, buffer + link prefill for the
    /// free-running one.
    pub initial_lambda: i64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TraceMeta {
    pub backend: String,
    pub config_digest: u64,
    pub seed: u64,
    pub jitter_eps_ns: u64,
    pub duration_ns: u64,
    pub machines: Vec<MachineMeta>,
    pub edges: Vec<EdgeMeta>,
}

/// One firing. Occupancy and counter vectors are snapshots taken right
/// after the event applied, indexed like the meta edge/machine lists.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TickRecord {
    pub time: SimTime,
    pub machine: u32,
    pub theta_after: u64,
    pub omega_hz: f64,
    pub inputs: Vec<u64>,
    pub outputs: Vec<u64>,
    /// Receiver-buffer occupancy per edge.
    pub beta: Vec<u32>,
    /// In-transit frames per edge (emitted or in execution, not yet in the
    /// receiver buffer).
    pub gamma: Vec<u32>,
    /// Every machine's event counter.
    pub thetas: Vec<u64>,
}

/// A skipped firing cycle (input empty or output estimated full).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct StutterRecord {
    pub time: SimTime,
    pub machine: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FrameEnd {
    pub time: SimTime,
    /// The machine's event counter just before the event (the firing's
    /// zero-based index).
    pub theta: u64,
}

/// Life of one frame on one channel. Frames pre-loaded as initial
/// conditions have no production record; frames still in flight or unread
/// at the end of the run have no arrival/consumption.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct FrameTrace {
    pub payload: u64,
    pub produced: Option<FrameEnd>,
    pub arrived: Option<SimTime>,
    pub consumed: Option<FrameEnd>,
}

#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct ChannelTrace {
    /// Indexed by frame sequence number; consumption follows sequence order.
    pub frames: Vec<FrameTrace>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TickRecord>,
    pub stutters: Vec<StutterRecord>,
    pub channels: Vec<ChannelTrace>,
}

impl Trace {
    pub fn total_firings(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn fires_of(&self, machine: u32) -> impl Iterator<Item = &TickRecord> {
        self.records.iter().filter(move |r| r.machine == machine)
    }

    /// Per-frame delay label: consumption index minus production index.
    /// `None` for initial-condition frames and frames not yet consumed.
    pub fn frame_lambda(frame: &FrameTrace) -> Option<i64> {
        match (frame.produced, frame.consumed) {
            (Some(p), Some(c)) => Some(c.theta as i64 - p.theta as i64),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Debug, thiserror::Error)]
pub enum CompareError {
    #[error("traces come from different topologies: {0}")]
    TopologyMismatch(String),
}

/// Determinacy verdict: per machine, the sequences of output token vectors
/// must agree up to the shorter trace's length.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum CompareVerdict {
    Ok,
    Diverged {
        machine: u32,
        firing_index: u64,
        left: Vec<u64>,
        right: Vec<u64>,
    },
}

impl CompareVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, CompareVerdict::Ok)
    }
}

pub fn compare_traces(a: &Trace, b: &Trace) -> Result<CompareVerdict, CompareError> {
    if a.meta.machines.len() != b.meta.machines.len() {
        return Err(CompareError::TopologyMismatch(String::from(
            "machine counts differ",
        )));
    }
    for (ma, mb) in a.meta.machines.iter().zip(&b.meta.machines) {
        if ma.name != mb.name {
            return Err(CompareError::TopologyMismatch(String::from(
                "machine names differ",
            )));
        }
    }
    if a.meta.edges.len() != b.meta.edges.len() {
        return Err(CompareError::TopologyMismatch(String::from(
            "edge counts differ",
        )));
    }
    for (ea, eb) in a.meta.edges.iter().zip(&b.meta.edges) {
        if (ea.src, ea.dst) != (eb.src, eb.dst) {
            return Err(CompareError::TopologyMismatch(String::from(
                "edge endpoints differ",
            )));
        }
    }
    for machine in 0..a.meta.machines.len() as u32 {
        for (idx, (ra, rb)) in a.fires_of(machine).zip(b.fires_of(machine)).enumerate() {
            if ra.outputs != rb.outputs {
                return Ok(CompareVerdict::Diverged {
                    machine,
                    firing_index: idx as u64,
                    left: ra.outputs.clone(),
                    right: rb.outputs.clone(),
                });
            }
        }
    }
    Ok(CompareVerdict::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn tiny_trace() -> Trace {
        Trace {
            meta: TraceMeta {
                backend: "test".to_string(),
                config_digest: 1,
                seed: 0,
                jitter_eps_ns: 0,
                duration_ns: 10,
                machines: vec![MachineMeta {
                    name: "m".to_string(),
                    freq_hz: 1.0,
                }],
                edges: vec![],
            },
            records: vec![
                TickRecord {
                    time: SimTime(0),
                    machine: 0,
                    theta_after: 1,
                    omega_hz: 1.0,
                    inputs: vec![],
                    outputs: vec![11],
                    beta: vec![],
                    gamma: vec![],
                    thetas: vec![1],
                },
                TickRecord {
                    time: SimTime(5),
                    machine: 0,
                    theta_after: 2,
                    omega_hz: 1.0,
                    inputs: vec![],
                    outputs: vec![22],
                    beta: vec![],
                    gamma: vec![],
                    thetas: vec![2],
                },
            ],
            stutters: vec![],
            channels: vec![],
        }
    }

    #[test]
    fn identical_traces_compare_ok() {
        let t = tiny_trace();
        assert!(compare_traces(&t, &t).unwrap().is_ok());
    }

    #[test]
    fn corrupted_payload_reports_first_divergence() {
        let a = tiny_trace();
        let mut b = tiny_trace();
        b.records[1].outputs[0] = 99;
        match compare_traces(&a, &b).unwrap() {
            CompareVerdict::Diverged {
                machine,
                firing_index,
                left,
                right,
            } => {
                assert_eq!(machine, 0);
                assert_eq!(firing_index, 1);
                assert_eq!(left, vec![22]);
                assert_eq!(right, vec![99]);
            }
            CompareVerdict::Ok => panic!("divergence not detected"),
        }
    }

    #[test]
    fn different_topologies_error() {
        let a = tiny_trace();
        let mut b = tiny_trace();
        b.meta.machines[0].name = "other".to_string();
        assert!(compare_traces(&a, &b).is_err());
    }

    #[test]
    fn shorter_trace_compares_up_to_its_length() {
        let a = tiny_trace();
        let mut b = tiny_trace();
        b.records.pop();
        assert!(compare_traces(&a, &b).unwrap().is_ok());
    }
}
