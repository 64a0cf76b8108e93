//! Command line for the logical synchrony network simulator.
//!
//! Exit codes are a stable contract: 0 success, 1 configuration error,
//! 2 runtime abort (buffer overflow/underflow, queue cap), 3 check failure
//! (determinacy divergence, delay-invariance violation, invalid network).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsn_core::bittide::ControllerKind;
use lsn_core::engine::JitterSpec;
use lsn_core::extgraph::build_extended_graph;
use lsn_core::graph::{normalize_nonnegative, validate_lsn};
use lsn_core::metrics::{invariance_report, sweep_marking};
use lsn_core::trace::{compare_traces, CompareVerdict};
use lsn_core::SimTime;

use lsn_sim::config::{self, ControllerOverrides, LoadedConfig, Model};
use lsn_sim::dot::extended_graph_dot;
use lsn_sim::output;
use lsn_sim::runner::{execute, RunError, RunSpec};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lsn-sim",
    about = "Simulate a network topology under kpn/ffp/lsfp/bittide semantics, check its delay invariants and determinacy, and measure throughput/latency trade-offs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trace + metric summaries.
    Simulate(SimulateArgs),
    /// Run twice with different jitter seeds and verify determinacy and
    /// delay invariance.
    Check(CheckArgs),
    /// Sweep the initial marking of one edge and record rate/latency.
    Sweep(SweepArgs),
    /// Validate a topology; optionally normalize delays and export the
    /// extended event graph.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct CommonRunArgs {
    /// Topology JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Runtime semantics.
    #[arg(long, value_enum)]
    model: Model,
    /// Simulated seconds.
    #[arg(long)]
    duration: f64,
    /// Controller kind for the free-running backend (p|pi).
    #[arg(long)]
    controller: Option<String>,
    /// Proportional gain.
    #[arg(long)]
    kp: Option<f64>,
    /// Integral gain.
    #[arg(long)]
    ki: Option<f64>,
    /// Frequency clamp as a fraction of nominal.
    #[arg(long)]
    clamp_pct: Option<f64>,
    /// Do not mirror one-way edges for the free-running backend.
    #[arg(long)]
    unidirectional: bool,
}

impl CommonRunArgs {
    fn overrides(&self) -> ControllerOverrides {
        ControllerOverrides {
            kind: self.controller.as_deref().map(|k| match k {
                "p" => ControllerKind::Proportional,
                _ => ControllerKind::ProportionalIntegral,
            }),
            kp: self.kp,
            ki: self.ki,
            clamp_pct: self.clamp_pct,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: CommonRunArgs,
    /// Jitter seed (meaningful with --jitter-eps > 0).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Jitter magnitude in seconds (0 disables jitter).
    #[arg(long, default_value_t = 0.0)]
    jitter_eps: f64,
    /// Where trace and summary files land.
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Also write plot-data series (rates, occupancies).
    #[arg(long)]
    plot_data: bool,
    /// Omit the wall-clock timestamp from output metadata.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    run: CommonRunArgs,
    /// Jitter magnitude in seconds; defaults to 10% of the shortest
    /// nominal period.
    #[arg(long)]
    jitter_eps: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Topology JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Bounded-FIFO variant to sweep (ffp or lsfp).
    #[arg(long, value_enum, default_value = "ffp")]
    model: Model,
    /// Edge to sweep, as "src->dst" or "src:dst".
    #[arg(long)]
    edge: String,
    /// Inclusive marking range, as "lo..hi".
    #[arg(long)]
    range: String,
    /// Simulated seconds per marking value.
    #[arg(long, default_value_t = 150.0)]
    duration: f64,
    /// Machine whose rate is reported (defaults to the first).
    #[arg(long)]
    machine: Option<String>,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Topology JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Write an all-nonnegative relabelling of the topology.
    #[arg(long)]
    normalize: bool,
    /// Export the extended event graph at this horizon as DOT.
    #[arg(long, value_name = "HORIZON")]
    extended_graph: Option<u64>,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[arg(long)]
    no_timestamp: bool,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Check(args) => cmd_check(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
    .unwrap_or_else(|code| code)
}

fn load_or_exit(path: &Path) -> Result<LoadedConfig, ExitCode> {
    config::load(path).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn timestamp_for(no_timestamp: bool) -> Option<u64> {
    (!no_timestamp).then(output::now_unix)
}

fn run_once(
    cfg: &LoadedConfig,
    args: &CommonRunArgs,
    jitter: Option<JitterSpec>,
) -> Result<lsn_core::Trace, RunError> {
    execute(
        cfg,
        &RunSpec {
            model: args.model,
            duration: SimTime::from_secs_f64(args.duration),
            jitter,
            controller: args.overrides(),
            bidirectional: !args.unidirectional,
        },
    )
}

fn write_outputs(
    trace: &lsn_core::Trace,
    dir: &Path,
    plot_data: bool,
    ts: Option<u64>,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    output::write_trace_csv(trace, &dir.join("trace.csv"), ts)?;
    output::write_trace_jsonl(trace, &dir.join("trace.jsonl"), ts)?;
    let summary = output::build_summary(trace, ts);
    output::write_summary(&summary, &dir.join("summary.json"))?;
    if plot_data {
        output::write_plot_data(trace, &dir.join("plot-data"))?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, ExitCode> {
    let cfg = load_or_exit(&args.run.config)?;
    let jitter = (args.jitter_eps > 0.0).then(|| JitterSpec {
        seed: args.seed,
        eps: SimTime::from_secs_f64(args.jitter_eps),
    });
    let ts = timestamp_for(args.no_timestamp);
    match run_once(&cfg, &args.run, jitter) {
        Ok(trace) => {
            write_outputs(&trace, &args.output_dir, args.plot_data, ts).map_err(io_err)?;
            let summary = output::build_summary(&trace, ts);
            for m in &summary.machines {
                println!(
                    "{}: {} fires, steady rate {:.4} Hz (nominal {} Hz)",
                    m.name, m.fires, m.steady_rate_hz, m.freq_hz
                );
            }
            println!(
                "invariance: {}",
                if summary.invariance_ok { "OK" } else { "FAIL" }
            );
            println!("wrote {}", args.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(RunError::Aborted(aborted)) => {
            // Keep the partial trace for diagnosis.
            write_outputs(&aborted.trace, &args.output_dir, args.plot_data, ts).map_err(io_err)?;
            eprintln!("run aborted at {}: {:?}", aborted.time, aborted.kind);
            Ok(ExitCode::from(EXIT_RUNTIME))
        }
        Err(e) => {
            eprintln!("config error: {e}");
            Ok(ExitCode::from(EXIT_CONFIG))
        }
    }
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, ExitCode> {
    let cfg = load_or_exit(&args.run.config)?;
    let eps = match args.jitter_eps {
        Some(e) => SimTime::from_secs_f64(e),
        None => SimTime(cfg.shortest_period().as_nanos() / 10),
    };
    let mut traces = Vec::new();
    for seed in [1, 2] {
        match run_once(&cfg, &args.run, Some(JitterSpec { seed, eps })) {
            Ok(t) => traces.push(t),
            Err(RunError::Aborted(aborted)) => {
                eprintln!(
                    "run with seed {seed} aborted at {}: {:?}",
                    aborted.time, aborted.kind
                );
                return Ok(ExitCode::from(EXIT_RUNTIME));
            }
            Err(e) => {
                eprintln!("config error: {e}");
                return Ok(ExitCode::from(EXIT_CONFIG));
            }
        }
    }
    let mut ok = true;
    match compare_traces(&traces[0], &traces[1]) {
        Ok(CompareVerdict::Ok) => println!("determinacy: OK (seeds 1 and 2 agree)"),
        Ok(CompareVerdict::Diverged {
            machine,
            firing_index,
            left,
            right,
        }) => {
            ok = false;
            println!(
                "determinacy: FAIL at machine {} firing {}: {:?} vs {:?}",
                traces[0].meta.machines[machine as usize].name, firing_index, left, right
            );
        }
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    }
    for trace in &traces {
        let report = invariance_report(trace);
        if report.ok {
            println!("invariance (seed {}): OK", trace.meta.seed);
        } else {
            ok = false;
            for e in report.per_edge.iter().filter(|e| !e.ok) {
                println!(
                    "invariance (seed {}): FAIL on {} -> {}: observed {:?}",
                    trace.meta.seed,
                    trace.meta.edges[e.edge].src_name,
                    trace.meta.edges[e.edge].dst_name,
                    e.lambdas
                );
            }
        }
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK)
    })
}

fn parse_range(text: &str) -> Option<(u64, u64)> {
    let (lo, hi) = text.split_once("..")?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let (lo, hi) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
    (lo <= hi).then_some((lo, hi))
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, ExitCode> {
    if !matches!(args.model, Model::Ffp | Model::Lsfp) {
        eprintln!("sweep requires a bounded-FIFO model (ffp or lsfp)");
        return Ok(ExitCode::from(EXIT_CONFIG));
    }
    let cfg = load_or_exit(&args.config)?;
    let Some((lo, hi)) = parse_range(&args.range) else {
        eprintln!("bad --range `{}` (expected lo..hi)", args.range);
        return Ok(ExitCode::from(EXIT_CONFIG));
    };
    let edge = match cfg.edge_index(&args.edge) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    let setup = match cfg.to_setup(args.model) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    let machine = match &args.machine {
        Some(name) => match setup.machines.iter().position(|m| &m.name == name) {
            Some(i) => i as u32,
            None => {
                eprintln!("config error: unknown machine `{name}`");
                return Ok(ExitCode::from(EXIT_CONFIG));
            }
        },
        None => 0,
    };
    let result = match sweep_marking(
        &setup,
        edge,
        lo..=hi,
        SimTime::from_secs_f64(args.duration),
        machine,
    ) {
        Ok(r) => r,
        Err(lsn_core::metrics::SweepError::Aborted { marking }) => {
            eprintln!("sweep run aborted at marking {marking}");
            return Ok(ExitCode::from(EXIT_RUNTIME));
        }
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    std::fs::create_dir_all(&args.output_dir).map_err(io_err)?;
    let ts = timestamp_for(args.no_timestamp);
    let machine_name = &setup.machines[machine as usize].name;
    output::write_sweep_csv(
        &result,
        &args.edge,
        machine_name,
        &args.output_dir.join("sweep.csv"),
        ts,
    )
    .map_err(io_err)?;
    for p in &result.points {
        println!(
            "marking {:>3}: rate {:6.2}% latency {:7.2}%",
            p.marking, p.rate_rel_pct, p.latency_rel_pct
        );
    }
    println!("wrote {}", args.output_dir.join("sweep.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode, ExitCode> {
    let cfg = load_or_exit(&args.config)?;
    let graph = match cfg.analysis_graph() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    let report = validate_lsn(&graph);
    if report.ok() {
        println!(
            "valid network: {} machines, {} edges, all cycles positive",
            graph.machine_count(),
            graph.edges().len()
        );
    } else {
        println!("invalid network:");
        for v in &report.violations {
            println!("  {}", v.detail);
        }
        return Ok(ExitCode::from(EXIT_CHECK));
    }

    std::fs::create_dir_all(&args.output_dir).map_err(io_err)?;
    if args.normalize {
        let (normalized, offsets) = match normalize_nonnegative(&graph) {
            Ok(x) => x,
            Err(e) => {
                eprintln!("normalization failed: {e}");
                return Ok(ExitCode::from(EXIT_CHECK));
            }
        };
        let mut file = cfg.file.clone();
        for (edge_json, edge) in file.edges.iter_mut().zip(normalized.edges()) {
            edge_json.lambda = Some(edge.lambda);
        }
        file.description = Some(match &cfg.file.description {
            Some(d) => format!("{d} (delays relabelled to be nonnegative)"),
            None => "delays relabelled to be nonnegative".to_string(),
        });
        let path = args.output_dir.join("normalized.json");
        let mut text = serde_json::to_string_pretty(&file).map_err(json_err)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err)?;
        for (m, off) in graph.machines().iter().zip(&offsets) {
            println!("offset {} = {}", m.name, off);
        }
        println!("wrote {}", path.display());
    }
    if let Some(horizon) = args.extended_graph {
        let ext = match build_extended_graph(&graph, horizon) {
            Ok(x) => x,
            Err(e) => {
                eprintln!("config error: {e}");
                return Ok(ExitCode::from(EXIT_CONFIG));
            }
        };
        let path = args.output_dir.join("extended.dot");
        std::fs::write(&path, extended_graph_dot(&graph, &ext)).map_err(io_err)?;
        println!(
            "extended graph at horizon {}: {} nodes, {} edges -> {}",
            horizon,
            ext.node_count(),
            ext.edges.len(),
            path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn io_err(e: std::io::Error) -> ExitCode {
    eprintln!("io error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn json_err(e: serde_json::Error) -> ExitCode {
    eprintln!("serialization error: {e}");
    ExitCode::from(EXIT_CONFIG)
}
