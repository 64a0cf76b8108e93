//! Topology files and run configuration.
//!
//! A topology is a JSON object with `machines` (name, nominal frequency)
//! and `edges` (endpoints by name, optional `lambda` for pure graph
//! analysis, and the runtime fields the backends consume). Optional
//! top-level blocks carry controller gains, the unbounded-queue safety cap,
//! and test hooks for fault injection.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lsn_core::bittide::{ControlPolicy, ControllerKind};
use lsn_core::engine::{EdgeSetup, MachineSetup, SimSetup};
use lsn_core::graph::{LsnEdge, LsnGraph, MachineId};
use lsn_core::SimTime;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub machines: Vec<MachineJson>,
    pub edges: Vec<EdgeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kpn_safety_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_hooks: Option<TestHooks>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineJson {
    pub name: String,
    pub freq_hz: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub src: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_delay_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse_delay_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_marking: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsfp_marking_override: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ki: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_period: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp_pct: Option<f64>,
}

/// Fault-injection hooks for exercising the failure paths; never active
/// unless a config names them explicitly.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestHooks {
    /// Frames to lose in transfer, by edge label ("src->dst") and sequence
    /// number.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drop_frames: Vec<DropJson>,
    /// Force the free-running backend's initial buffer occupancy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bittide_beta0: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropJson {
    pub edge: String,
    pub seq: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum Model {
    Kpn,
    Ffp,
    Lsfp,
    Bittide,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Kpn => "kpn",
            Model::Ffp => "ffp",
            Model::Lsfp => "lsfp",
            Model::Bittide => "bittide",
        }
    }

    pub fn needs_link_delay(self) -> bool {
        !matches!(self, Model::Kpn)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("edge {0} -> {1}: unknown machine `{2}`")]
    UnknownMachine(String, String, String),
    #[error("machine `{0}` has non-positive frequency {1}")]
    BadFrequency(String, f64),
    #[error("edge {0} -> {1}: link_delay_s required by this model")]
    MissingDelay(String, String),
    #[error("edge {0} -> {1}: negative delay {2}")]
    NegativeDelay(String, String, f64),
    #[error("edge {0} -> {1}: lambda {2} is negative and no initial_marking is given; runtime backends need nonnegative delays (normalize first)")]
    NegativeLambda(String, String, i64),
    #[error("edge {0} -> {1}: needs lambda or initial_marking for graph analysis")]
    MissingLambda(String, String),
    #[error("no edge labelled `{0}` (expected \"src->dst\" or \"src:dst\")")]
    UnknownEdge(String),
}

/// A parsed topology together with the digest of its file bytes.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub file: TopologyFile,
    pub digest: u64,
    pub path: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let digest_bytes = Sha256::digest(&bytes);
    let digest = u64::from_be_bytes(digest_bytes[..8].try_into().unwrap());
    let file: TopologyFile =
        serde_json::from_slice(&bytes).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(LoadedConfig {
        file,
        digest,
        path: path.to_path_buf(),
    })
}

impl LoadedConfig {
    fn machine_index(&self, name: &str) -> Option<u32> {
        self.file
            .machines
            .iter()
            .position(|m| m.name == name)
            .map(|i| i as u32)
    }

    /// Resolves names and runtime fields into an executable setup.
    /// The runtime marking is `initial_marking`, falling back to a
    /// nonnegative `lambda`.
    pub fn to_setup(&self, model: Model) -> Result<SimSetup, ConfigError> {
        for m in &self.file.machines {
            if m.freq_hz <= 0.0 || !m.freq_hz.is_finite() {
                return Err(ConfigError::BadFrequency(m.name.clone(), m.freq_hz));
            }
        }
        let mut edges = Vec::with_capacity(self.file.edges.len());
        for e in &self.file.edges {
            let src = self.machine_index(&e.src).ok_or_else(|| {
                ConfigError::UnknownMachine(e.src.clone(), e.dst.clone(), e.src.clone())
            })?;
            let dst = self.machine_index(&e.dst).ok_or_else(|| {
                ConfigError::UnknownMachine(e.src.clone(), e.dst.clone(), e.dst.clone())
            })?;
            let delay_s = match e.link_delay_s {
                Some(d) if d < 0.0 => {
                    return Err(ConfigError::NegativeDelay(e.src.clone(), e.dst.clone(), d))
                }
                Some(d) => d,
                None if model.needs_link_delay() => {
                    return Err(ConfigError::MissingDelay(e.src.clone(), e.dst.clone()))
                }
                None => 0.0,
            };
            let marking = match (e.initial_marking, e.lambda) {
                (Some(m), _) => m,
                (None, Some(l)) if l >= 0 => l as u64,
                (None, Some(l)) => {
                    return Err(ConfigError::NegativeLambda(e.src.clone(), e.dst.clone(), l))
                }
                (None, None) => 0,
            };
            edges.push(EdgeSetup {
                src,
                dst,
                link_delay: SimTime::from_secs_f64(delay_s),
                reverse_delay: e.reverse_delay_s.map(SimTime::from_secs_f64),
                capacity: e.capacity,
                initial_marking: marking,
                lsfp_marking_override: e.lsfp_marking_override,
            });
        }
        Ok(SimSetup {
            machines: self
                .file
                .machines
                .iter()
                .map(|m| MachineSetup {
                    name: m.name.clone(),
                    freq_hz: m.freq_hz,
                })
                .collect(),
            edges,
        })
    }

    /// The abstract delay-labelled graph for validation, normalization,
    /// and event-graph export: `lambda`, falling back to the marking.
    pub fn analysis_graph(&self) -> Result<LsnGraph, ConfigError> {
        let mut edges = Vec::with_capacity(self.file.edges.len());
        for e in &self.file.edges {
            let src = self.machine_index(&e.src).ok_or_else(|| {
                ConfigError::UnknownMachine(e.src.clone(), e.dst.clone(), e.src.clone())
            })?;
            let dst = self.machine_index(&e.dst).ok_or_else(|| {
                ConfigError::UnknownMachine(e.src.clone(), e.dst.clone(), e.dst.clone())
            })?;
            let lambda = match (e.lambda, e.initial_marking) {
                (Some(l), _) => l,
                (None, Some(m)) => m as i64,
                (None, None) => {
                    return Err(ConfigError::MissingLambda(e.src.clone(), e.dst.clone()))
                }
            };
            edges.push(LsnEdge {
                src: MachineId(src),
                dst: MachineId(dst),
                lambda,
            });
        }
        LsnGraph::new(
            self.file.machines.iter().map(|m| m.name.clone()).collect(),
            edges,
        )
        .map_err(|e| match e {
            lsn_core::graph::GraphError::DuplicateName(n) => {
                ConfigError::UnknownMachine(n.clone(), n.clone(), n)
            }
            lsn_core::graph::GraphError::EndpointOutOfRange(id, _) => {
                ConfigError::UnknownEdge(format!("machine index {}", id.0))
            }
        })
    }

    /// Controller policy: defaults, overridden by the config's controller
    /// block, overridden by explicit CLI values.
    pub fn controller_policy(&self, cli: &ControllerOverrides) -> ControlPolicy {
        let mut policy = ControlPolicy::default();
        if let Some(c) = &self.file.controller {
            if let Some(kind) = &c.kind {
                policy.kind = match kind.as_str() {
                    "p" => ControllerKind::Proportional,
                    _ => ControllerKind::ProportionalIntegral,
                };
            }
            if let Some(v) = c.kp {
                policy.k_p = v;
            }
            if let Some(v) = c.ki {
                policy.k_i = v;
            }
            if let Some(v) = c.update_period {
                policy.update_period = v.max(1);
            }
            if let Some(v) = c.clamp_pct {
                policy.clamp_pct = v;
            }
        }
        if let Some(kind) = cli.kind {
            policy.kind = kind;
        }
        if let Some(v) = cli.kp {
            policy.k_p = v;
        }
        if let Some(v) = cli.ki {
            policy.k_i = v;
        }
        if let Some(v) = cli.clamp_pct {
            policy.clamp_pct = v;
        }
        policy
    }

    /// Resolves an "src->dst" / "src:dst" label to an edge index.
    pub fn edge_index(&self, label: &str) -> Result<usize, ConfigError> {
        let (src, dst) = label
            .split_once("->")
            .or_else(|| label.split_once(':'))
            .ok_or_else(|| ConfigError::UnknownEdge(label.to_string()))?;
        let (src, dst) = (src.trim(), dst.trim());
        self.file
            .edges
            .iter()
            .position(|e| e.src == src && e.dst == dst)
            .ok_or_else(|| ConfigError::UnknownEdge(label.to_string()))
    }

    /// Drop-hook list resolved to (edge index, sequence number).
    pub fn drops(&self) -> Result<Vec<(u32, u64)>, ConfigError> {
        let Some(hooks) = &self.file.test_hooks else {
            return Ok(Vec::new());
        };
        hooks
            .drop_frames
            .iter()
            .map(|d| Ok((self.edge_index(&d.edge)? as u32, d.seq)))
            .collect()
    }

    pub fn bittide_beta0(&self) -> Option<u64> {
        self.file.test_hooks.as_ref().and_then(|h| h.bittide_beta0)
    }

    pub fn kpn_safety_cap(&self) -> Option<usize> {
        self.file.kpn_safety_cap
    }

    /// Shortest nominal period across machines, the reference for the
    /// default jitter magnitude.
    pub fn shortest_period(&self) -> SimTime {
        let max_freq = self
            .file
            .machines
            .iter()
            .map(|m| m.freq_hz)
            .fold(0.0f64, f64::max);
        if max_freq <= 0.0 {
            SimTime::ZERO
        } else {
            SimTime::from_secs_f64(1.0 / max_freq)
        }
    }
}

/// CLI-level controller settings (each `None` defers to config/defaults).
#[derive(Clone, Copy, Debug, Default)]
pub struct ControllerOverrides {
    pub kind: Option<ControllerKind>,
    pub kp: Option<f64>,
    pub ki: Option<f64>,
    pub clamp_pct: Option<f64>,
}
