//! File formats, run orchestration, and output writers for the logical
//! synchrony network simulator. The computational kernel lives in
//! `lsn-core`; this crate adds JSON topologies, CSV/JSONL trace emission,
//! summaries, and the pieces the `lsn-sim` binary is built from.

pub mod config;
pub mod dot;
pub mod output;
pub mod runner;
