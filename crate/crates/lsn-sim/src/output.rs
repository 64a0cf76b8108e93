//! Trace and summary emission: CSV, JSON-lines, summary JSON, and plot-data
//! series. Output is byte-deterministic for identical inputs; the only
//! wall-clock field is the metadata timestamp, suppressed by
//! `timestamp: None`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use lsn_core::metrics::{
    channel_latency_from, firing_rate, invariance_report, mean_occupancy, mean_rate,
    steady_state_start, SweepResult,
};
use lsn_core::trace::Trace;
use lsn_core::SimTime;

fn edge_label(trace: &Trace, idx: usize) -> String {
    let e = &trace.meta.edges[idx];
    format!("{}->{}", e.src_name, e.dst_name)
}

fn meta_line(trace: &Trace, timestamp: Option<u64>) -> String {
    let mut line = format!(
        "# backend={} config={:016x} seed={} jitter_eps_ns={} duration_ns={}",
        trace.meta.backend,
        trace.meta.config_digest,
        trace.meta.seed,
        trace.meta.jitter_eps_ns,
        trace.meta.duration_ns
    );
    if let Some(ts) = timestamp {
        line.push_str(&format!(" written_at={ts}"));
    }
    line
}

/// One row per processed machine event (fires and stutters merged in time
/// order), stable column order, metadata header row on top.
pub fn write_trace_csv(trace: &Trace, path: &Path, timestamp: Option<u64>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", meta_line(trace, timestamp))?;
    let mut header = String::from("time_ns,machine,kind,theta_after,omega_hz,inputs,outputs");
    for i in 0..trace.meta.edges.len() {
        header.push_str(&format!(",beta_{}", edge_label(trace, i)));
    }
    for i in 0..trace.meta.edges.len() {
        header.push_str(&format!(",gamma_{}", edge_label(trace, i)));
    }
    writeln!(w, "{header}")?;

    let join = |values: &[u64]| {
        values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    let (mut fi, mut si) = (0usize, 0usize);
    while fi < trace.records.len() || si < trace.stutters.len() {
        let take_fire = match (trace.records.get(fi), trace.stutters.get(si)) {
            (Some(r), Some(s)) => (r.time, r.machine) <= (s.time, s.machine),
            (Some(_), None) => true,
            (None, _) => false,
        };
        if take_fire {
            let r = &trace.records[fi];
            fi += 1;
            write!(
                w,
                "{},{},fire,{},{},{},{}",
                r.time.as_nanos(),
                trace.meta.machines[r.machine as usize].name,
                r.theta_after,
                r.omega_hz,
                join(&r.inputs),
                join(&r.outputs)
            )?;
            for b in &r.beta {
                write!(w, ",{b}")?;
            }
            for g in &r.gamma {
                write!(w, ",{g}")?;
            }
            writeln!(w)?;
        } else {
            let s = &trace.stutters[si];
            si += 1;
            let blanks = ",".repeat(2 * trace.meta.edges.len());
            writeln!(
                w,
                "{},{},stutter,,,,{}",
                s.time.as_nanos(),
                trace.meta.machines[s.machine as usize].name,
                blanks
            )?;
        }
    }
    w.flush()
}

/// JSON-lines: first line the metadata object, then one object per event.
pub fn write_trace_jsonl(trace: &Trace, path: &Path, timestamp: Option<u64>) -> io::Result<()> {
    #[derive(Serialize)]
    struct MetaLine<'a> {
        #[serde(rename = "type")]
        kind: &'static str,
        #[serde(flatten)]
        meta: &'a lsn_core::trace::TraceMeta,
        #[serde(skip_serializing_if = "Option::is_none")]
        written_at: Option<u64>,
    }
    #[derive(Serialize)]
    struct FireLine<'a> {
        #[serde(rename = "type")]
        kind: &'static str,
        #[serde(flatten)]
        record: &'a lsn_core::trace::TickRecord,
    }
    #[derive(Serialize)]
    struct StutterLine<'a> {
        #[serde(rename = "type")]
        kind: &'static str,
        #[serde(flatten)]
        record: &'a lsn_core::trace::StutterRecord,
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(
        &mut w,
        &MetaLine {
            kind: "meta",
            meta: &trace.meta,
            written_at: timestamp,
        },
    )?;
    writeln!(w)?;
    let (mut fi, mut si) = (0usize, 0usize);
    while fi < trace.records.len() || si < trace.stutters.len() {
        let take_fire = match (trace.records.get(fi), trace.stutters.get(si)) {
            (Some(r), Some(s)) => (r.time, r.machine) <= (s.time, s.machine),
            (Some(_), None) => true,
            (None, _) => false,
        };
        if take_fire {
            serde_json::to_writer(
                &mut w,
                &FireLine {
                    kind: "fire",
                    record: &trace.records[fi],
                },
            )?;
            fi += 1;
        } else {
            serde_json::to_writer(
                &mut w,
                &StutterLine {
                    kind: "stutter",
                    record: &trace.stutters[si],
                },
            )?;
            si += 1;
        }
        writeln!(w)?;
    }
    w.flush()
}

#[derive(Serialize)]
pub struct MachineSummary {
    pub name: String,
    pub freq_hz: f64,
    pub fires: u64,
    pub stutters: u64,
    pub mean_rate_hz: f64,
    pub steady_rate_hz: f64,
    pub final_omega_hz: f64,
}

#[derive(Serialize)]
pub struct LatencySummary {
    pub frames: usize,
    pub min_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
}

#[derive(Serialize)]
pub struct EdgeSummary {
    pub edge: String,
    pub initial_lambda: i64,
    pub observed_lambdas: Vec<i64>,
    pub invariant: bool,
    pub capacity: u32,
    pub initial_marking: u64,
    pub steady_mean_occupancy: f64,
    pub latency: LatencySummary,
}

#[derive(Serialize)]
pub struct Summary {
    pub backend: String,
    pub config_digest: String,
    pub seed: u64,
    pub jitter_eps_ns: u64,
    pub duration_s: f64,
    pub steady_state_start_s: f64,
    pub invariance_ok: bool,
    pub machines: Vec<MachineSummary>,
    pub edges: Vec<EdgeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub written_at: Option<u64>,
}

pub fn build_summary(trace: &Trace, timestamp: Option<u64>) -> Summary {
    let from = steady_state_start(trace);
    let duration = SimTime(trace.meta.duration_ns);
    let invariance = invariance_report(trace);
    let machines = trace
        .meta
        .machines
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let fires = trace.fires_of(i as u32).count() as u64;
            MachineSummary {
                name: m.name.clone(),
                freq_hz: m.freq_hz,
                fires,
                stutters: trace
                    .stutters
                    .iter()
                    .filter(|s| s.machine == i as u32)
                    .count() as u64,
                mean_rate_hz: mean_rate(trace, i as u32, SimTime::ZERO),
                steady_rate_hz: mean_rate(trace, i as u32, from),
                final_omega_hz: trace
                    .fires_of(i as u32)
                    .last()
                    .map(|r| r.omega_hz)
                    .unwrap_or(m.freq_hz),
            }
        })
        .collect();
    let edges = trace
        .meta
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let lat = channel_latency_from(trace, i, from);
            let inv = &invariance.per_edge[i];
            EdgeSummary {
                edge: edge_label(trace, i),
                initial_lambda: e.initial_lambda,
                observed_lambdas: inv.lambdas.iter().copied().collect(),
                invariant: inv.ok,
                capacity: e.capacity,
                initial_marking: e.initial_marking,
                steady_mean_occupancy: mean_occupancy(trace, i, from, duration),
                latency: LatencySummary {
                    frames: lat.taus_s.len(),
                    min_s: lat.min_s,
                    mean_s: lat.mean_s,
                    max_s: lat.max_s,
                },
            }
        })
        .collect();
    Summary {
        backend: trace.meta.backend.clone(),
        config_digest: format!("{:016x}", trace.meta.config_digest),
        seed: trace.meta.seed,
        jitter_eps_ns: trace.meta.jitter_eps_ns,
        duration_s: duration.as_secs_f64(),
        steady_state_start_s: from.as_secs_f64(),
        invariance_ok: invariance.ok,
        machines,
        edges,
        written_at: timestamp,
    }
}

pub fn write_summary(summary: &Summary, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)?;
    w.flush()
}

/// Plot-data panels: per-machine firing-rate series and per-edge occupancy
/// series on a common window grid.
pub fn write_plot_data(trace: &Trace, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let duration = trace.meta.duration_ns;
    let window = SimTime((duration / 60).max(1_000_000_000));

    let mut w = BufWriter::new(File::create(dir.join("rates.csv"))?);
    let mut header = String::from("window_start_s");
    for m in &trace.meta.machines {
        header.push_str(&format!(",{}_hz", m.name));
    }
    writeln!(w, "{header}")?;
    let series: Vec<_> = (0..trace.meta.machines.len())
        .map(|m| firing_rate(trace, m as u32, window))
        .collect();
    if let Some(first) = series.first() {
        for k in 0..first.rates.len() {
            write!(w, "{}", first.rates[k].0.as_secs_f64())?;
            for s in &series {
                write!(w, ",{}", s.rates[k].1)?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("occupancy.csv"))?);
    let mut header = String::from("window_start_s");
    for i in 0..trace.meta.edges.len() {
        header.push_str(&format!(",beta_{}", edge_label(trace, i)));
    }
    writeln!(w, "{header}")?;
    let windows = duration.div_ceil(window.as_nanos()) as usize;
    for k in 0..windows {
        let from = SimTime(k as u64 * window.as_nanos());
        let to = SimTime(((k + 1) as u64 * window.as_nanos()).min(duration));
        write!(w, "{}", from.as_secs_f64())?;
        for i in 0..trace.meta.edges.len() {
            write!(w, ",{}", mean_occupancy(trace, i, from, to))?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_sweep_csv(
    result: &SweepResult,
    edge_label: &str,
    machine_name: &str,
    path: &Path,
    timestamp: Option<u64>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut meta = format!("# sweep edge={edge_label} machine={machine_name}");
    if let Some(ts) = timestamp {
        meta.push_str(&format!(" written_at={ts}"));
    }
    writeln!(w, "{meta}")?;
    writeln!(w, "marking,rate_hz,rate_rel_pct,latency_s,latency_rel_pct")?;
    for p in &result.points {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.marking, p.rate_hz, p.rate_rel_pct, p.latency_s, p.latency_rel_pct
        )?;
    }
    w.flush()
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
