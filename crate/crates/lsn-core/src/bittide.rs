//! Free-running elastic-buffer semantics.
//!
//! Every machine ticks on its own clock. A tick consumes one frame from
//! each inbound buffer, runs the program, and emits one frame on each
//! outbound link; nothing ever blocks. An empty inbound buffer at a tick or
//! an arrival into a full buffer is a hard abort — losing or stalling
//! frames would break logical synchrony rather than degrade it.
//!
//! Buffer occupancies feed a per-machine P or PI controller: inbound
//! buffers above the setpoint mean the neighbours run fast, so the local
//! clock speeds up to drain them (and vice versa), steering all clocks to a
//! common rate without exchanging any explicit synchronization messages.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::engine::{AbortKind, Backend, Runtime, Scheduler, SetupError, SimSetup};
use crate::graph::validate_lsn;
use crate::program::MachineProgram;
use crate::time::{ceil_pos, period_ns, SimTime};
use crate::trace::{TickRecord, Trace};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ControllerKind {
    Proportional,
    ProportionalIntegral,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ControlPolicy {
    pub kind: ControllerKind,
    pub k_p: f64,
    pub k_i: f64,
    /// Ticks between corrections.
    pub update_period: u32,
    /// Frequency clamp as a fraction of nominal (0.05 = +/-5%).
    pub clamp_pct: f64,
}

impl Default for ControlPolicy {
    fn default() -> Self {
        ControlPolicy {
            kind: ControllerKind::ProportionalIntegral,
            k_p: 2e-3,
            k_i: 1e-5,
            update_period: 1,
            clamp_pct: 0.05,
        }
    }
}

/// One controller correction. `error` is the mean over inbound edges of
/// (occupancy - setpoint) / capacity; positive error (neighbours faster)
/// raises the clock.
pub fn control_update(
    policy: &ControlPolicy,
    omega_nominal: f64,
    integral: &mut f64,
    error: f64,
) -> f64 {
    let correction = match policy.kind {
        ControllerKind::Proportional => policy.k_p * error,
        ControllerKind::ProportionalIntegral => {
            *integral += error;
            policy.k_p * error + policy.k_i * *integral
        }
    };
    let omega = omega_nominal * (1.0 + correction);
    let lo = omega_nominal * (1.0 - policy.clamp_pct);
    let hi = omega_nominal * (1.0 + policy.clamp_pct);
    omega.clamp(lo, hi)
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct BittideOptions {
    pub policy: ControlPolicy,
    /// Add the reverse of any one-way edge (same delay and capacity), the
    /// usual assumption for clock control.
    pub bidirectional: bool,
    /// Test hook: force the initial buffer occupancy instead of the
    /// midpoint prefill.
    pub beta0_override: Option<u64>,
}

impl Default for BittideOptions {
    fn default() -> Self {
        BittideOptions {
            policy: ControlPolicy::default(),
            bidirectional: true,
            beta0_override: None,
        }
    }
}

pub struct BittideBackend {
    rt: Runtime,
    policy: ControlPolicy,
    /// Link-prefill arrivals to schedule before the first tick.
    pending_arrivals: Vec<(SimTime, u32, u64)>,
}

impl BittideBackend {
    /// Builds the elastic state: each buffer pre-filled to the setpoint
    /// (capacity/2) and each link pre-filled with ceil(delay x consumer
    /// frequency) evenly spaced in-flight frames. The resulting per-edge
    /// delay labels land in the trace metadata.
    pub fn new(
        setup: &SimSetup,
        programs: Vec<Box<dyn MachineProgram>>,
        opts: BittideOptions,
    ) -> Result<Self, SetupError> {
        setup.validate_structure()?;
        let mut setup = setup.clone();
        if opts.bidirectional {
            let existing: Vec<(u32, u32)> = setup.edges.iter().map(|e| (e.src, e.dst)).collect();
            let mut extra = Vec::new();
            for e in &setup.edges {
                if !existing.contains(&(e.dst, e.src)) {
                    let mut rev = *e;
                    rev.src = e.dst;
                    rev.dst = e.src;
                    rev.capacity = Some(e.resolved_capacity());
                    extra.push(rev);
                }
            }
            setup.edges.extend(extra);
        }

        let capacities: Vec<u32> = setup.edges.iter().map(|e| e.resolved_capacity()).collect();
        for (i, &c) in capacities.iter().enumerate() {
            if c < 2 {
                return Err(SetupError::CapacityTooSmall {
                    edge: i as u32,
                    capacity: c,
                });
            }
        }
        let beta0: Vec<u64> = capacities
            .iter()
            .map(|&c| opts.beta0_override.unwrap_or(c as u64 / 2))
            .collect();
        let gamma0: Vec<u64> = setup
            .edges
            .iter()
            .map(|e| {
                let consumer = &setup.machines[e.dst as usize];
                ceil_pos(e.link_delay.as_secs_f64() * consumer.freq_hz)
            })
            .collect();
        let lambdas: Vec<i64> = beta0
            .iter()
            .zip(&gamma0)
            .map(|(&b, &g)| (b + g) as i64)
            .collect();

        // Structural validity of the realized delay labels (also catches
        // self-loops and duplicate pairs).
        let lsn = {
            let mut labelled = setup.clone();
            for (e, &l) in labelled.edges.iter_mut().zip(&lambdas) {
                e.initial_marking = l as u64;
            }
            labelled.lsn_graph()
        };
        let report = validate_lsn(&lsn);
        if !report.ok() {
            return Err(SetupError::InvalidLsn(report));
        }

        let markings: Vec<u64> = setup.edges.iter().map(|e| e.initial_marking).collect();
        let mut rt = Runtime::new(
            &setup,
            programs,
            "bittide",
            &markings,
            &capacities,
            &lambdas,
        )?;
        let mut pending_arrivals = Vec::new();
        for (i, e) in setup.edges.iter().enumerate() {
            rt.prefill_buffer(i as u32, beta0[i]);
            let g = gamma0[i];
            for k in 0..g {
                let seq = rt.prefill_transit(i as u32);
                // Evenly spaced over (0, link_delay]: one frame lands about
                // every consumer period, sustaining the receiver until the
                // producer's own first emission crosses the link.
                let at = SimTime(e.link_delay.as_nanos() * (k + 1) / g);
                pending_arrivals.push((at, i as u32, seq));
            }
        }
        Ok(BittideBackend {
            rt,
            policy: opts.policy,
            pending_arrivals,
        })
    }

    pub fn with_drops(mut self, drops: Vec<(u32, u64)>) -> Self {
        self.rt.drops = drops;
        self
    }
}

impl Backend for BittideBackend {
    fn trace(&self) -> &Trace {
        &self.rt.trace
    }

    fn into_trace(self) -> Trace {
        self.rt.trace
    }

    fn start(&mut self, sched: &mut Scheduler) {
        for (at, edge, seq) in self.pending_arrivals.drain(..) {
            sched.push_arrival(at, edge, seq);
        }
    }

    fn on_tick(
        &mut self,
        machine: u32,
        now: SimTime,
        sched: &mut Scheduler,
    ) -> Result<(), AbortKind> {
        for &e in &self.rt.machines[machine as usize].in_edges {
            if self.rt.channels[e as usize].buffer.is_empty() {
                return Err(AbortKind::BufferUnderflow { edge: e, machine });
            }
        }
        let theta_pre = self.rt.machines[machine as usize].theta;
        let inputs = self.rt.consume_inputs(machine, now);
        let outputs = self.rt.fire(machine, now, &inputs);
        let out_edges = self.rt.machines[machine as usize].out_edges.clone();
        for (k, &e) in out_edges.iter().enumerate() {
            let seq = self.rt.produce_frame(e, outputs[k], now, theta_pre);
            let arrival = now + self.rt.channels[e as usize].link_delay;
            sched.push_arrival(arrival, e, seq);
        }

        let due = {
            let m = &mut self.rt.machines[machine as usize];
            m.ticks_since_update += 1;
            m.ticks_since_update >= self.policy.update_period
        };
        if due {
            let in_edges = &self.rt.machines[machine as usize].in_edges;
            let error = if in_edges.is_empty() {
                0.0
            } else {
                in_edges
                    .iter()
                    .map(|&e| {
                        let ch = &self.rt.channels[e as usize];
                        (ch.buffer.len() as f64 - ch.capacity as f64 / 2.0) / ch.capacity as f64
                    })
                    .sum::<f64>()
                    / in_edges.len() as f64
            };
            let m = &mut self.rt.machines[machine as usize];
            m.ticks_since_update = 0;
            m.omega_hz = control_update(&self.policy, m.omega_nominal_hz, &mut m.integral, error);
            m.period = period_ns(m.omega_hz);
        }
        self.rt.record_fire(machine, now, inputs, outputs);
        Ok(())
    }

    fn on_arrival(&mut self, edge: u32, seq: u64, now: SimTime) -> Result<(), AbortKind> {
        let ch = &self.rt.channels[edge as usize];
        if ch.buffer.len() as u32 == ch.capacity {
            return Err(AbortKind::BufferOverflow {
                edge,
                occupancy: ch.capacity,
            });
        }
        self.rt.arrive(edge, seq, now);
        Ok(())
    }

    fn period_ns(&self, machine: u32) -> u64 {
        self.rt.machines[machine as usize].period
    }
}

/// The dynamic delay observation at a record boundary: frames on the link
/// plus frames in the buffer plus the consumer/producer count difference.
/// Constant across the run for every edge; also computable per frame as the
/// consumption index minus the production index.
pub fn observed_lambda_bt(record: &TickRecord, edge_index: usize, src: u32, dst: u32) -> i64 {
    record.gamma[edge_index] as i64
        + record.beta[edge_index] as i64
        + record.thetas[dst as usize] as i64
        - record.thetas[src as usize] as i64
}
