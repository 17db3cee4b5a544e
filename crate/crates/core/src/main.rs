use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use camsim::harness::{self, Config, Simulation, SweepRow};
use camsim::topology::TopologyKind;
use camsim::workload::gen_microbenchmark;
use camsim::{Result, SimError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

/// Directory-coherent multiprocessor simulator with criticality-aware arbitration.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// `key = value` config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    topology: Option<TopologyKind>,
    #[arg(long)]
    procs: Option<usize>,
    #[arg(long)]
    counters: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    noncrit_work: Option<usize>,
    #[arg(long)]
    bandwidth: Option<u64>,
    #[arg(long, value_enum)]
    cam: Option<OnOff>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` settings, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the protocol trace to stderr.
    #[arg(long)]
    trace: bool,
    /// Print the generated program and exit.
    #[arg(long)]
    dump_program: bool,
    /// Run a named matrix of configs, each with CAM off and on.
    #[arg(long, value_name = "PRESET")]
    sweep: Option<String>,
}

fn build_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    for kv in &cli.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(SimError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")));
        };
        cfg.set(k, v)?;
    }
    if let Some(t) = cli.topology {
        cfg.topology = t;
    }
    if let Some(v) = cli.procs {
        cfg.procs = v;
    }
    if let Some(v) = cli.counters {
        cfg.counters = v;
    }
    if let Some(v) = cli.iters {
        cfg.iters = v;
    }
    if let Some(v) = cli.noncrit_work {
        cfg.noncrit_work = v;
    }
    if let Some(v) = cli.bandwidth {
        cfg.bandwidth = v;
    }
    if let Some(v) = cli.cam {
        cfg.cam = matches!(v, OnOff::On);
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

fn output(rows: &[SweepRow], out: &Option<PathBuf>) -> Result<()> {
    for r in rows {
        if let Err(e) = &r.result {
            eprintln!("{}: {e}", r.config_id());
        }
    }
    match out {
        Some(p) => harness::emit_csv(rows, p),
        None => harness::write_csv(rows, std::io::stdout().lock()).map_err(|source| SimError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = build_config(&cli)?;
    if cli.dump_program {
        cfg.validate()?;
        let prog = gen_microbenchmark(cfg.workload(), cfg.mem_bytes())?;
        print!("{}", prog.dump());
        return Ok(true);
    }
    if let Some(name) = &cli.sweep {
        let base = harness::preset(name)?;
        // flags given on the command line apply to every preset entry
        let rows = harness::run_sweep(
            &base
                .into_iter()
                .map(|mut c| {
                    c.iters = cfg.iters;
                    c.noncrit_work = cfg.noncrit_work;
                    c.seed = cfg.seed;
                    c.jitter = cfg.jitter;
                    c
                })
                .collect::<Vec<_>>(),
        );
        output(&rows, &cli.out)?;
        return Ok(rows.iter().all(|r| r.result.is_ok()));
    }

    let mut sim = Simulation::new(cfg.clone())?;
    if cli.trace {
        sim.set_trace(Box::new(std::io::BufWriter::new(std::io::stderr())));
    }
    let result = sim.run().map_err(|e| e.to_string());
    let ok = result.is_ok();
    if let Ok(s) = &result {
        if s.violations.total() > 0 {
            eprintln!("invariant violations: {:?}", s.violations);
            for v in &s.violation_log {
                eprintln!("  {v}");
            }
        }
    }
    output(
        &[SweepRow {
            config: cfg,
            result,
            speedup: None,
        }],
        &cli.out,
    )?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(2)
        }
    }
}
