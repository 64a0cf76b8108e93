//! Glue from a loaded config to a finished trace.

use lsn_core::bittide::{BittideBackend, BittideOptions};
use lsn_core::engine::{run, Aborted, JitterSpec, SetupError};
use lsn_core::ffp::{FfpBackend, FfpOptions};
use lsn_core::kpn::{KpnBackend, KpnOptions};
use lsn_core::program::default_programs;
use lsn_core::trace::Trace;
use lsn_core::SimTime;

use crate::config::{ConfigError, ControllerOverrides, LoadedConfig, Model};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("setup rejected: {0}")]
    Setup(#[from] SetupError),
    #[error("run aborted at {}: {:?}", .0.time, .0.kind)]
    Aborted(Box<Aborted>),
}

#[derive(Clone, Copy, Debug)]
pub struct RunSpec {
    pub model: Model,
    pub duration: SimTime,
    pub jitter: Option<JitterSpec>,
    pub controller: ControllerOverrides,
    /// Let the free-running backend mirror one-way edges.
    pub bidirectional: bool,
}

pub fn execute(config: &LoadedConfig, spec: &RunSpec) -> Result<Trace, RunError> {
    let setup = config.to_setup(spec.model)?;
    let programs = default_programs(setup.machine_count());
    let drops = config.drops()?;
    let outcome = match spec.model {
        Model::Kpn => {
            let mut opts = KpnOptions::default();
            if let Some(cap) = config.kpn_safety_cap() {
                opts.queue_safety_cap = cap;
            }
            let backend = KpnBackend::new(&setup, programs, opts)?.with_drops(drops);
            run(backend, spec.duration, spec.jitter)
        }
        Model::Ffp | Model::Lsfp => {
            let opts = FfpOptions {
                heuristic_markings: spec.model == Model::Lsfp,
            };
            let backend = FfpBackend::new(&setup, programs, opts)?.with_drops(drops);
            run(backend, spec.duration, spec.jitter)
        }
        Model::Bittide => {
            let opts = BittideOptions {
                policy: config.controller_policy(&spec.controller),
                bidirectional: spec.bidirectional,
                beta0_override: config.bittide_beta0(),
            };
            let backend = BittideBackend::new(&setup, programs, opts)?.with_drops(drops);
            run(backend, spec.duration, spec.jitter)
        }
    };
    match outcome {
        Ok(mut trace) => {
            trace.meta.config_digest = config.digest;
            Ok(trace)
        }
        Err(mut aborted) => {
            aborted.trace.meta.config_digest = config.digest;
            Err(RunError::Aborted(aborted))
        }
    }
}
