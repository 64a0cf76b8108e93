//! Bounded-FIFO realization with back-pressure blocking writes.
//!
//! Buffers live at the receiver. A machine fires at its periodic tick only
//! when every input buffer is non-empty and every output passes the
//! fullness check; otherwise the cycle is skipped (a stutter) and retried
//! one period later. A firing consumes its inputs at the tick and emits its
//! outputs one execution time (the nominal period) later; the frame then
//! spends the link delay in flight.
//!
//! The producer cannot see the remote buffer. It bounds the occupancy from
//! above with its own emission count minus the consumer's firing count as
//! last seen over an unbuffered reverse link:
//! `estimate(t) = theta_p(t) - theta_q(t - l_qp) + marking >= real(t)`.
//! The overestimate grows with latency, so gating on `estimate < C` keeps
//! the real peak strictly below capacity whenever delays are positive.
//!
//! The delay-masking heuristic ("lsfp") sizes markings as ceil(link_delay x
//! consumer_frequency), with a liveness floor of one token on cyclic edges.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::engine::{AbortKind, Backend, Runtime, Scheduler, SetupError, SimSetup};
use crate::program::MachineProgram;
use crate::time::{ceil_pos, period_ns, SimTime};
use crate::trace::Trace;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct FfpOptions {
    /// Replace configured markings with the delay-masking heuristic.
    pub heuristic_markings: bool,
}

#[derive(Clone, Copy, PartialEq, Debug, thiserror::Error)]
pub enum MarkingError {
    #[error("consumer frequency {0} is not positive")]
    BadFrequency(f64),
}

/// Tokens needed to cover a link's in-flight time at the consumer's rate:
/// ceil(link_delay x consumer_frequency). Callers keep cyclic edges live by
/// flooring the result at one token.
pub fn lsfp_initial_marking(link_delay_s: f64, consumer_freq_hz: f64) -> Result<u64, MarkingError> {
    if consumer_freq_hz <= 0.0 || !consumer_freq_hz.is_finite() {
        return Err(MarkingError::BadFrequency(consumer_freq_hz));
    }
    Ok(ceil_pos(link_delay_s * consumer_freq_hz))
}

/// Per-edge markings for a setup: configured values, or the heuristic when
/// `heuristic_markings` is set (respecting per-edge overrides).
pub fn resolve_markings(setup: &SimSetup, opts: FfpOptions) -> Result<Vec<u64>, SetupError> {
    if !opts.heuristic_markings {
        return Ok(setup.edges.iter().map(|e| e.initial_marking).collect());
    }
    let graph = setup.lsn_graph();
    setup
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if let Some(m) = e.lsfp_marking_override {
                return Ok(m);
            }
            let consumer = &setup.machines[e.dst as usize];
            let m = lsfp_initial_marking(e.link_delay.as_secs_f64(), consumer.freq_hz)
                .map_err(|_| SetupError::BadFrequency(e.dst, consumer.freq_hz))?;
            Ok(if graph.edge_on_cycle(i) { m.max(1) } else { m })
        })
        .collect()
}

pub struct FfpBackend {
    rt: Runtime,
}

impl FfpBackend {
    pub fn new(
        setup: &SimSetup,
        programs: Vec<Box<dyn MachineProgram>>,
        opts: FfpOptions,
    ) -> Result<Self, SetupError> {
        setup.validate_structure()?;
        let markings = resolve_markings(setup, opts)?;
        // Cycle positivity is a property of the markings actually used.
        let mut resolved = setup.clone();
        for (e, &m) in resolved.edges.iter_mut().zip(&markings) {
            e.initial_marking = m;
        }
        resolved.validate_runtime()?;
        let caps: Vec<u32> = setup
            .edges
            .iter()
            .zip(&markings)
            .map(|(e, &m)| {
                e.capacity
                    .unwrap_or((2 * m + 2).min(u32::MAX as u64) as u32)
            })
            .collect();
        let lambdas: Vec<i64> = markings.iter().map(|&m| m as i64).collect();
        let name = if opts.heuristic_markings {
            "lsfp"
        } else {
            "ffp"
        };
        let mut rt = Runtime::new(setup, programs, name, &markings, &caps, &lambdas)?;
        for (i, &m) in markings.iter().enumerate() {
            rt.prefill_buffer(i as u32, m);
        }
        Ok(FfpBackend { rt })
    }

    pub fn with_drops(mut self, drops: Vec<(u32, u64)>) -> Self {
        self.rt.drops = drops;
        self
    }

    /// Conservative remote-occupancy bound for an out-edge, evaluated at
    /// the producer's tick: own firing count minus the consumer count
    /// delayed by the reverse link, plus the initial marking.
    fn estimate_at_tick(&self, edge: u32, now: SimTime) -> i64 {
        let ch = &self.rt.channels[edge as usize];
        let own = self.rt.machines[ch.src as usize].theta as i64;
        let seen = self
            .rt
            .fires_at_or_before(ch.dst, now.signed_sub(ch.reverse_delay)) as i64;
        own - seen + ch.marking as i64
    }

    /// Both gates: every input occupied and every output estimated below
    /// capacity.
    fn can_fire(&self, machine: u32, now: SimTime) -> bool {
        self.rt.all_inputs_nonempty(machine)
            && self.rt.machines[machine as usize]
                .out_edges
                .iter()
                .all(|&e| {
                    self.estimate_at_tick(e, now) < self.rt.channels[e as usize].capacity as i64
                })
    }
}

impl Backend for FfpBackend {
    fn trace(&self) -> &Trace {
        &self.rt.trace
    }

    fn into_trace(self) -> Trace {
        self.rt.trace
    }

    fn start(&mut self, _sched: &mut Scheduler) {}

    fn on_tick(
        &mut self,
        machine: u32,
        now: SimTime,
        sched: &mut Scheduler,
    ) -> Result<(), AbortKind> {
        if !self.can_fire(machine, now) {
            self.rt.record_stutter(machine, now);
            return Ok(());
        }
        let theta_pre = self.rt.machines[machine as usize].theta;
        let inputs = self.rt.consume_inputs(machine, now);
        let outputs = self.rt.fire(machine, now, &inputs);
        let exec_time = SimTime(self.rt.machines[machine as usize].nominal_period);
        let out_edges = self.rt.machines[machine as usize].out_edges.clone();
        for (k, &e) in out_edges.iter().enumerate() {
            let seq = self.rt.produce_frame(e, outputs[k], now, theta_pre);
            // Emission happens one execution time after the consuming tick;
            // the arrival deadline is exactly link_delay after emission.
            let arrival = now + exec_time + self.rt.channels[e as usize].link_delay;
            sched.push_arrival(arrival, e, seq);
        }
        self.rt.record_fire(machine, now, inputs, outputs);
        Ok(())
    }

    fn on_arrival(&mut self, edge: u32, seq: u64, now: SimTime) -> Result<(), AbortKind> {
        if let Some(occupancy) = self.rt.arrive(edge, seq, now) {
            debug_assert!(
                occupancy <= self.rt.channels[edge as usize].capacity,
                "conservative estimate keeps real occupancy within capacity"
            );
        }
        Ok(())
    }

    fn period_ns(&self, machine: u32) -> u64 {
        self.rt.machines[machine as usize].period
    }
}

/// Occupancy reconstruction from a finished trace, for cross-checking the
/// runtime against the counting identities. Producer counts are *emission*
/// counts: a firing's tokens reach the wire one nominal period after its
/// tick, so fires are counted once that period has elapsed.
pub struct OccupancyProbe<'a> {
    trace: &'a Trace,
    fire_times: Vec<Vec<u64>>,
    periods: Vec<u64>,
}

impl<'a> OccupancyProbe<'a> {
    pub fn new(trace: &'a Trace) -> Self {
        let mut fire_times = alloc::vec![Vec::new(); trace.meta.machines.len()];
        for r in &trace.records {
            fire_times[r.machine as usize].push(r.time.as_nanos());
        }
        let periods = trace
            .meta
            .machines
            .iter()
            .map(|m| period_ns(m.freq_hz))
            .collect();
        OccupancyProbe {
            trace,
            fire_times,
            periods,
        }
    }

    fn fires_at_or_before(&self, machine: u32, t: i128) -> i64 {
        if t < 0 {
            return 0;
        }
        self.fire_times[machine as usize].partition_point(|&ft| ft as i128 <= t) as i64
    }

    /// Emissions completed by `t`: fires whose execution time has elapsed.
    fn emissions_at_or_before(&self, machine: u32, t: i128) -> i64 {
        self.fires_at_or_before(machine, t - self.periods[machine as usize] as i128)
    }

    /// Receiver-buffer occupancy at `t`, replayed from the frame log.
    pub fn real_occupancy(&self, edge: usize, t: SimTime) -> i64 {
        let frames = &self.trace.channels[edge].frames;
        let arrived = frames
            .iter()
            .filter(|f| f.arrived.is_some_and(|a| a <= t))
            .count() as i64;
        let consumed = frames
            .iter()
            .filter(|f| f.consumed.is_some_and(|c| c.time <= t))
            .count() as i64;
        arrived - consumed
    }

    /// The same occupancy by the counting identity: producer emissions as
    /// of one link delay ago, minus consumer fires, plus the marking.
    pub fn real_occupancy_formula(&self, edge: usize, t: SimTime) -> i64 {
        let e = &self.trace.meta.edges[edge];
        let arrived =
            self.emissions_at_or_before(e.src, t.as_nanos() as i128 - e.link_delay_ns as i128);
        let consumed = self.fires_at_or_before(e.dst, t.as_nanos() as i128);
        arrived - consumed + e.initial_marking as i64
    }

    /// The producer-side conservative bound at `t`: own emission count
    /// minus the consumer count seen over the reverse link.
    pub fn estimate_occupancy(&self, edge: usize, t: SimTime) -> i64 {
        let e = &self.trace.meta.edges[edge];
        let own = self.emissions_at_or_before(e.src, t.as_nanos() as i128);
        let seen =
            self.fires_at_or_before(e.dst, t.as_nanos() as i128 - e.reverse_delay_ns as i128);
        own - seen + e.initial_marking as i64
    }

    /// Every instant something happened on this edge or at its endpoints,
    /// capped to the run (state past the horizon is undefined: deadlines at
    /// or after the duration were never processed).
    pub fn event_times(&self, edge: usize) -> Vec<SimTime> {
        let e = &self.trace.meta.edges[edge];
        let mut times: Vec<u64> = Vec::new();
        for f in &self.trace.channels[edge].frames {
            if let Some(p) = f.produced {
                times.push(p.time.as_nanos());
                times.push(p.time.as_nanos() + self.periods[e.src as usize]);
            }
            if let Some(a) = f.arrived {
                times.push(a.as_nanos());
            }
            if let Some(c) = f.consumed {
                times.push(c.time.as_nanos());
            }
        }
        times.sort_unstable();
        times.dedup();
        times.retain(|&t| t < self.trace.meta.duration_ns);
        times.into_iter().map(SimTime).collect()
    }
}
