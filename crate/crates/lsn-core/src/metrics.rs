//! Post-hoc trace analysis: firing rates, channel latency, occupancy
//! statistics, delay-invariance reports, and marking sweeps.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::engine::{run, SetupError, SimSetup};
use crate::ffp::{FfpBackend, FfpOptions};
use crate::program::default_programs;
use crate::time::SimTime;
use crate::trace::Trace;

/// Firing rate per contiguous window: fired ticks only, stutters excluded.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RateSeries {
    pub machine: u32,
    pub window: SimTime,
    /// (window start, firings per second over the window)
    pub rates: Vec<(SimTime, f64)>,
}

pub fn firing_rate(trace: &Trace, machine: u32, window: SimTime) -> RateSeries {
    debug_assert!(window.as_nanos() > 0);
    let duration = trace.meta.duration_ns;
    let windows = duration.div_ceil(window.as_nanos().max(1)) as usize;
    let mut counts = alloc::vec![0u64; windows];
    for r in trace.fires_of(machine) {
        let idx = (r.time.as_nanos() / window.as_nanos()) as usize;
        if idx < windows {
            counts[idx] += 1;
        }
    }
    RateSeries {
        machine,
        window,
        rates: counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                (
                    SimTime(i as u64 * window.as_nanos()),
                    c as f64 / window.as_secs_f64(),
                )
            })
            .collect(),
    }
}

/// Per-frame transport latency on one edge: consumption time minus
/// production time, matched by frame sequence number. Initial-condition
/// frames (no production) and frames unconsumed at the end are excluded.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub edge: usize,
    pub taus_s: Vec<f64>,
    pub min_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
}

pub fn channel_latency(trace: &Trace, edge: usize) -> LatencyRecord {
    channel_latency_from(trace, edge, SimTime::ZERO)
}

/// As [`channel_latency`], counting only frames consumed at or after
/// `from` (for steady-state views).
pub fn channel_latency_from(trace: &Trace, edge: usize, from: SimTime) -> LatencyRecord {
    let mut taus = Vec::new();
    for f in &trace.channels[edge].frames {
        if let (Some(p), Some(c)) = (f.produced, f.consumed) {
            if c.time >= from {
                taus.push((c.time.as_nanos() - p.time.as_nanos()) as f64 / 1e9);
            }
        }
    }
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &t in &taus {
        min = if t < min { t } else { min };
        max = if t > max { t } else { max };
        sum += t;
    }
    let mean = if taus.is_empty() {
        0.0
    } else {
        sum / taus.len() as f64
    };
    LatencyRecord {
        edge,
        min_s: if taus.is_empty() { 0.0 } else { min },
        mean_s: mean,
        max_s: if taus.is_empty() { 0.0 } else { max },
        taus_s: taus,
    }
}

/// Time-weighted mean buffer occupancy on an edge over [from, to),
/// reconstructed exactly from the frame log's arrival/consumption times.
pub fn mean_occupancy(trace: &Trace, edge: usize, from: SimTime, to: SimTime) -> f64 {
    if to.as_nanos() <= from.as_nanos() {
        return 0.0;
    }
    let frames = &trace.channels[edge].frames;
    let mut deltas: Vec<(u64, i64)> = Vec::new();
    for f in frames {
        if let Some(a) = f.arrived {
            deltas.push((a.as_nanos(), 1));
        }
        if let Some(c) = f.consumed {
            deltas.push((c.time.as_nanos(), -1));
        }
    }
    deltas.sort_unstable();
    let mut occupancy = 0i64;
    let mut cursor = from.as_nanos();
    let mut weighted = 0i128;
    for (t, d) in deltas {
        if t <= from.as_nanos() {
            occupancy += d;
            continue;
        }
        let t = t.min(to.as_nanos());
        weighted += occupancy as i128 * (t - cursor) as i128;
        cursor = t;
        occupancy += d;
        if cursor >= to.as_nanos() {
            break;
        }
    }
    if cursor < to.as_nanos() {
        weighted += occupancy as i128 * (to.as_nanos() - cursor) as i128;
    }
    weighted as f64 / (to.as_nanos() - from.as_nanos()) as f64
}

/// Per-edge set of observed delay labels (consumption index minus
/// production index per frame); the run satisfies delay invariance iff
/// every set is a singleton.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct EdgeInvariance {
    pub edge: usize,
    pub lambdas: BTreeSet<i64>,
    pub frames_checked: usize,
    pub ok: bool,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub per_edge: Vec<EdgeInvariance>,
    pub ok: bool,
    /// No frame had both ends recorded anywhere: vacuously OK.
    pub empty: bool,
}

pub fn invariance_report(trace: &Trace) -> InvarianceReport {
    let mut per_edge = Vec::with_capacity(trace.channels.len());
    let mut total = 0usize;
    for (idx, ch) in trace.channels.iter().enumerate() {
        let mut lambdas = BTreeSet::new();
        let mut checked = 0usize;
        for f in &ch.frames {
            if let Some(l) = Trace::frame_lambda(f) {
                lambdas.insert(l);
                checked += 1;
            }
        }
        total += checked;
        per_edge.push(EdgeInvariance {
            edge: idx,
            ok: lambdas.len() <= 1,
            lambdas,
            frames_checked: checked,
        });
    }
    InvarianceReport {
        ok: per_edge.iter().all(|e| e.ok),
        empty: total == 0,
        per_edge,
    }
}

/// Start of the steady-state span: the later of 20% into the run and the
/// instant after which every machine's frequency stays within 0.5% of its
/// final value.
pub fn steady_state_start(trace: &Trace) -> SimTime {
    let burn_in = SimTime(trace.meta.duration_ns / 5);
    let mut converged = SimTime::ZERO;
    for m in 0..trace.meta.machines.len() as u32 {
        let records: Vec<_> = trace.fires_of(m).collect();
        let Some(last) = records.last() else { continue };
        let final_omega = last.omega_hz;
        let mut machine_converged = SimTime::ZERO;
        for r in &records {
            if (r.omega_hz - final_omega).abs() / final_omega > 0.005 {
                // Converged only after this record's successor.
                machine_converged = SimTime(r.time.as_nanos() + 1);
            }
        }
        converged = converged.max(machine_converged);
    }
    burn_in.max(converged)
}

/// Mean firing rate of a machine over [from, duration), in Hz.
pub fn mean_rate(trace: &Trace, machine: u32, from: SimTime) -> f64 {
    let span_ns = trace.meta.duration_ns.saturating_sub(from.as_nanos());
    if span_ns == 0 {
        return 0.0;
    }
    let fires = trace.fires_of(machine).filter(|r| r.time >= from).count();
    fires as f64 / (span_ns as f64 / 1e9)
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub marking: u64,
    pub rate_hz: f64,
    /// Steady-state rate of the designated machine relative to its
    /// nominal frequency, in percent.
    pub rate_rel_pct: f64,
    pub latency_s: f64,
    /// Mean latency on the swept edge relative to the sweep's minimum,
    /// in percent.
    pub latency_rel_pct: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub edge: usize,
    pub machine: u32,
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, PartialEq, Debug, thiserror::Error)]
pub enum SweepError {
    #[error("edge index {0} out of range")]
    EdgeOutOfRange(usize),
    #[error("machine index {0} out of range")]
    MachineOutOfRange(u32),
    #[error("empty marking range")]
    EmptyRange,
    #[error("setup rejected at marking {marking}: {source}")]
    Setup { marking: u64, source: SetupError },
    #[error("run aborted at marking {marking}")]
    Aborted { marking: u64 },
}

/// Runs one bounded-FIFO simulation per marking value on the swept edge and
/// reports the designated machine's steady-state rate (relative to nominal)
/// plus the swept edge's mean latency (relative to the sweep minimum).
/// Unspecified capacities are re-derived from each marking.
pub fn sweep_marking(
    setup: &SimSetup,
    edge: usize,
    markings: impl IntoIterator<Item = u64>,
    duration: SimTime,
    machine: u32,
) -> Result<SweepResult, SweepError> {
    if edge >= setup.edges.len() {
        return Err(SweepError::EdgeOutOfRange(edge));
    }
    if machine as usize >= setup.machines.len() {
        return Err(SweepError::MachineOutOfRange(machine));
    }
    let nominal = setup.machines[machine as usize].freq_hz;
    let mut points = Vec::new();
    for marking in markings {
        let mut variant = setup.clone();
        variant.edges[edge].initial_marking = marking;
        let backend = FfpBackend::new(
            &variant,
            default_programs(variant.machine_count()),
            FfpOptions::default(),
        )
        .map_err(|source| SweepError::Setup { marking, source })?;
        let trace = run(backend, duration, None).map_err(|_| SweepError::Aborted { marking })?;
        let from = steady_state_start(&trace);
        let rate = mean_rate(&trace, machine, from);
        let latency = channel_latency_from(&trace, edge, from).mean_s;
        points.push(SweepPoint {
            marking,
            rate_hz: rate,
            rate_rel_pct: 100.0 * rate / nominal,
            latency_s: latency,
            latency_rel_pct: 0.0,
        });
    }
    if points.is_empty() {
        return Err(SweepError::EmptyRange);
    }
    let min_latency = points
        .iter()
        .map(|p| p.latency_s)
        .fold(f64::INFINITY, f64::min)
        .max(1e-12);
    for p in &mut points {
        p.latency_rel_pct = 100.0 * p.latency_s / min_latency;
    }
    Ok(SweepResult {
        edge,
        machine,
        points,
    })
}
