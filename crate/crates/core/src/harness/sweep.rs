use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::Config;
use super::sim::run_simulation;
use super::stats::RunStats;
use crate::error::{Result, SimError};
use crate::topology::TopologyKind;

/// `base.total_cycles / cam.total_cycles` for two runs that differ only in the CAM flag.
pub fn compute_speedup(base: &RunStats, cam: &RunStats) -> Result<f64> {
    if !base.config.pairs_with(&cam.config) || base.config.cam || !cam.config.cam {
        return Err(SimError::Usage(format!(
            "speedup needs a baseline/CAM pair of one config, got {} and {}",
            base.config.config_id(),
            cam.config.config_id()
        )));
    }
    if cam.total_cycles == 0 {
        return Err(SimError::Usage("CAM run has zero cycles".into()));
    }
    Ok(base.total_cycles as f64 / cam.total_cycles as f64)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: Config,
    pub result: std::result::Result<RunStats, String>,
    /// Set on the CAM row of a pair whose two runs both succeeded.
    pub speedup: Option<f64>,
}

impl SweepRow {
    pub fn config_id(&self) -> String {
        self.config.config_id()
    }

    pub fn stats(&self) -> Option<&RunStats> {
        self.result.as_ref().ok()
    }
}

/// Runs every config with CAM off and on, in parallel. Rows come back sorted
/// by config id, so the baseline of each pair directly precedes its CAM row.
pub fn run_sweep(configs: &[Config]) -> Vec<SweepRow> {
    let mut all: Vec<Config> = Vec::with_capacity(configs.len() * 2);
    for c in configs {
        for cam in [false, true] {
            let mut v = c.clone();
            v.cam = cam;
            all.push(v);
        }
    }
    all.sort_by_key(|c| c.config_id());
    all.dedup_by_key(|c| c.config_id());

    let mut rows: Vec<SweepRow> = all
        .into_par_iter()
        .map(|config| SweepRow {
            result: run_simulation(&config).map_err(|e| e.to_string()),
            config,
            speedup: None,
        })
        .collect();

    for i in 1..rows.len() {
        let (head, tail) = rows.split_at_mut(i);
        let (base, cam) = (&head[i - 1], &mut tail[0]);
        if let (Ok(b), Ok(c)) = (&base.result, &cam.result) {
            cam.speedup = compute_speedup(b, c).ok();
        }
    }
    rows
}

/// Topologies × {16, 4} processors × counters {300, 100} × bandwidth {125, 250}.
pub fn paper_preset() -> Vec<Config> {
    let mut out = Vec::new();
    for topology in TopologyKind::ALL {
        for procs in [16, 4] {
            for counters in [300, 100] {
                for bandwidth in [125, 250] {
                    out.push(Config {
                        topology,
                        procs,
                        counters,
                        bandwidth,
                        ..Config::default()
                    });
                }
            }
        }
    }
    out
}

pub fn preset(name: &str) -> Result<Vec<Config>> {
    match name {
        "paper" => Ok(paper_preset()),
        other => Err(SimError::Usage(format!("unknown sweep preset `{other}` (known: paper)"))),
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "config_id",
    "topology",
    "procs",
    "counters",
    "iters",
    "bandwidth",
    "cam",
    "seed",
    "cycles",
    "crit_reqs",
    "noncrit_reqs",
    "ratio",
    "avg_link_util",
    "avg_contention_cycles",
    "speedup",
];

fn record(row: &SweepRow) -> Vec<String> {
    let c = &row.config;
    let mut r = vec![
        c.config_id(),
        c.topology.to_string(),
        c.procs.to_string(),
        c.counters.to_string(),
        c.iters.to_string(),
        c.bandwidth.to_string(),
        if c.cam { "on" } else { "off" }.to_string(),
        c.seed.to_string(),
    ];
    match &row.result {
        Ok(s) => r.extend([
            s.total_cycles.to_string(),
            s.crit_reqs.to_string(),
            s.noncrit_reqs.to_string(),
            format!("{:.6}", s.ratio()),
            format!("{:.6}", s.avg_link_utilization()),
            format!("{:.6}", s.avg_contention_cycles()),
        ]),
        Err(_) => r.extend(std::iter::repeat(String::new()).take(6)),
    }
    r.push(row.speedup.map(|x| format!("{x:.6}")).unwrap_or_default());
    r
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let io_err = |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    };
    let f = std::fs::File::create(path).map_err(io_err)?;
    write_csv(rows, std::io::BufWriter::new(f)).map_err(io_err)
}
