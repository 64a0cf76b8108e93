//! Deterministic simulation kernel for logical synchrony networks.
//!
//! A logical synchrony network is a directed graph of machines whose edges
//! carry an integer *logical delay*: the fixed offset between the tick index
//! at which a token is produced and the tick index at which it is consumed.
//! This crate models such networks and executes the same topology under four
//! runtime disciplines:
//!
//! - [`kpn`]: unbounded FIFOs, blocking reads, instant delivery
//! - [`ffp`]: bounded receiver-side FIFOs with back-pressure blocking writes
//!   (plus the LSFP marking heuristic that masks link delay)
//! - [`bittide`]: free-running clocks over elastic buffers with a P/PI
//!   occupancy controller, never blocking
//!
//! The [`engine`] drives any backend through a deadline-ordered event loop
//! with integer-nanosecond time, so equal deadlines compare exactly and runs
//! are bit-reproducible. [`graph`] holds the abstract model (validation,
//! negative-delay normalization, extended event graph), [`metrics`] the
//! post-hoc analysis (rates, latencies, delay-invariance reports, marking
//! sweeps), and [`trace`] the run record plus the determinacy check.
//!
//! The crate is `no_std` (alloc required); all file formats and CLI live in
//! the companion `lsn-sim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bittide;
pub mod engine;
pub mod extgraph;
pub mod ffp;
pub mod graph;
pub mod kpn;
pub mod metrics;
pub mod program;
pub mod time;
pub mod trace;

pub use engine::{run, Aborted, JitterSpec, SimSetup};
pub use graph::{validate_lsn, LsnGraph, MachineId};
pub use time::SimTime;
pub use trace::{compare_traces, Trace};
