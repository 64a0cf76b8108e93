//! Unbounded-FIFO Kahn semantics: blocking reads, non-blocking writes,
//! instant delivery.
//!
//! A machine attempts to fire at each of its periodic ticks; with any input
//! queue empty the attempt is a harmless stutter, retried next tick. A fire
//! pops one token per input, runs the program, and pushes one token per
//! output straight into the consumer queue. The model's queues are
//! unbounded; the simulator caps them to catch divergent configurations.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::engine::{AbortKind, Backend, Runtime, Scheduler, SetupError, SimSetup};
use crate::graph::LsnGraph;
use crate::program::MachineProgram;
use crate::time::SimTime;
use crate::trace::{TickRecord, Trace};

pub const DEFAULT_QUEUE_SAFETY_CAP: usize = 1_000_000;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct KpnOptions {
    pub queue_safety_cap: usize,
}

impl Default for KpnOptions {
    fn default() -> Self {
        KpnOptions {
            queue_safety_cap: DEFAULT_QUEUE_SAFETY_CAP,
        }
    }
}

/// The delay-labelled network realized by a Kahn setup: same vertices and
/// edges, with each label equal to the channel's initial occupancy.
pub fn kpn_to_lsn(setup: &SimSetup) -> LsnGraph {
    setup.lsn_graph()
}

pub struct KpnBackend {
    rt: Runtime,
    cap: usize,
}

impl KpnBackend {
    pub fn new(
        setup: &SimSetup,
        programs: Vec<Box<dyn MachineProgram>>,
        opts: KpnOptions,
    ) -> Result<Self, SetupError> {
        setup.validate_runtime()?;
        let markings: Vec<u64> = setup.edges.iter().map(|e| e.initial_marking).collect();
        // Queues are unbounded; the capacity column records the safety cap.
        let caps: Vec<u32> = setup
            .edges
            .iter()
            .map(|_| opts.queue_safety_cap.min(u32::MAX as usize) as u32)
            .collect();
        let lambdas: Vec<i64> = markings.iter().map(|&m| m as i64).collect();
        let mut rt = Runtime::new(setup, programs, "kpn", &markings, &caps, &lambdas)?;
        for (i, &m) in markings.iter().enumerate() {
            rt.prefill_buffer(i as u32, m);
        }
        Ok(KpnBackend {
            rt,
            cap: opts.queue_safety_cap,
        })
    }

    pub fn with_drops(mut self, drops: Vec<(u32, u64)>) -> Self {
        self.rt.drops = drops;
        self
    }

    /// Attempts one firing: pops a token from every input, steps the
    /// program, pushes to every output. With any input empty nothing
    /// changes (no partial consumption) and the attempt is recorded as a
    /// stutter.
    fn try_fire(&mut self, machine: u32, now: SimTime) -> Result<(), AbortKind> {
        if !self.rt.all_inputs_nonempty(machine) {
            self.rt.record_stutter(machine, now);
            return Ok(());
        }
        let theta_pre = self.rt.machines[machine as usize].theta;
        let inputs = self.rt.consume_inputs(machine, now);
        let outputs = self.rt.fire(machine, now, &inputs);
        let out_edges = self.rt.machines[machine as usize].out_edges.clone();
        let mut full: Option<AbortKind> = None;
        for (k, &e) in out_edges.iter().enumerate() {
            let seq = self.rt.produce_frame(e, outputs[k], now, theta_pre);
            // Instant delivery: straight into the consumer queue.
            self.rt.arrive(e, seq, now);
            let occupancy = self.rt.channels[e as usize].buffer.len();
            if occupancy > self.cap {
                full = Some(AbortKind::QueueCapExceeded {
                    edge: e,
                    occupancy,
                    cap: self.cap,
                });
            }
        }
        self.rt.record_fire(machine, now, inputs, outputs);
        match full {
            Some(kind) => Err(kind),
            None => Ok(()),
        }
    }
}

impl Backend for KpnBackend {
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
        _sched: &mut Scheduler,
    ) -> Result<(), AbortKind> {
        self.try_fire(machine, now)
    }

    fn on_arrival(&mut self, _edge: u32, _seq: u64, _now: SimTime) -> Result<(), AbortKind> {
        debug_assert!(false, "kpn schedules no arrivals");
        Ok(())
    }

    fn period_ns(&self, machine: u32) -> u64 {
        self.rt.machines[machine as usize].period
    }
}

/// The dynamic delay observation for a record boundary: queue occupancy
/// plus the consumer/producer count difference. Constant across the whole
/// run for every edge of a Kahn network.
pub fn observed_lambda(record: &TickRecord, edge_index: usize, src: u32, dst: u32) -> i64 {
    record.beta[edge_index] as i64 + record.thetas[dst as usize] as i64
        - record.thetas[src as usize] as i64
}
